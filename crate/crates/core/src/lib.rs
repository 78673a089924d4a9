//! Sagittal-plane human model and online ergonomic indexes.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical part of
//! the toolkit: the rigid-body model with its statically equivalent serial
//! chain, inverse dynamics, the eight normalized indexes with fatigue
//! tracking, subject calibration, causal signal conditioning and the
//! repeated-measures statistics. File formats, ingestion and the command line
//! live in the `ergomon` crate.

#![no_std]

extern crate alloc;

pub mod calibration;
pub mod dynamics;
mod error;
pub mod indexes;
mod joint;
pub mod linalg;
pub mod model;
pub mod signal;
pub mod stats;

pub use error::{Error, Result};
pub use joint::{Joint, N_JOINTS};

/// Standard gravity [m/s²], acting along −z of the world frame.
pub const GRAVITY: f64 = 9.80665;

/// Planar vector in the sagittal plane, stored as `(x, z)`.
pub type Vec2 = nalgebra::Vector2<f64>;
