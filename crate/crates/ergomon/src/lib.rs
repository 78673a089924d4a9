//! Sagittal ergonomic monitoring: file and stream ingestion, subject
//! calibration, per-trial index computation and reports.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod frame;
pub mod ingest;
pub mod profile;
pub mod report;
pub mod run;
pub mod session;

pub use error::{Error, Result};
