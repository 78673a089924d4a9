//! Subject profiles on disk and the bundled reference tables.

use std::collections::BTreeMap;
use std::path::Path;

use ergomon_core::calibration::SubjectProfile;
use ergomon_core::indexes::JointVector;
use ergomon_core::model::{AnthropometricRow, HumanModel, Segment};
use ergomon_core::{Joint, N_JOINTS};
use serde::Deserialize;

use crate::{Error, Result};

const ANTHROPOMETRICS: &str = include_str!("../data/anthropometrics.toml");
const LITERATURE: &str = include_str!("../data/literature.toml");

pub fn profile_from_json(text: &str) -> Result<SubjectProfile> {
    let p: SubjectProfile =
        serde_json::from_str(text).map_err(|e| Error::Input(format!("profile: {e}")))?;
    p.validate()?;
    Ok(p)
}

/// Pretty-printed JSON with a trailing newline.
pub fn profile_to_json(profile: &SubjectProfile) -> String {
    let mut s = serde_json::to_string_pretty(profile).expect("profile serializes");
    s.push('\n');
    s
}

pub fn load_profile(path: &Path) -> Result<SubjectProfile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    profile_from_json(&text).map_err(|e| Error::format(path, e))
}

pub fn save_profile(path: &Path, profile: &SubjectProfile) -> Result<()> {
    std::fs::write(path, profile_to_json(profile)).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRow {
    name: String,
    mass: f64,
    length: f64,
    com_along: f64,
    com_perp: f64,
    gyration: f64,
}

#[derive(Deserialize)]
struct AnthropometricTable {
    segment: Vec<SegmentRow>,
}

/// Bundled segment table: the foot followed by the seven chain links.
pub fn anthropometric_table() -> [AnthropometricRow; N_JOINTS + 1] {
    let t: AnthropometricTable =
        toml::from_str(ANTHROPOMETRICS).expect("bundled anthropometric table parses");
    let rows: Vec<AnthropometricRow> = t
        .segment
        .into_iter()
        .map(|r| AnthropometricRow {
            name: r.name,
            mass_fraction: r.mass,
            length_fraction: r.length,
            com_along_fraction: r.com_along,
            com_perp_fraction: r.com_perp,
            gyration_fraction: r.gyration,
        })
        .collect();
    rows.try_into().expect("bundled table has eight segments")
}

/// Default joint limits in SI units (radians, rad/s, N·m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiteratureLimits {
    pub q_max: JointVector,
    pub q_min: JointVector,
    pub qd_max: JointVector,
    pub dtau_max: JointVector,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitRow {
    q_max: f64,
    q_min: f64,
    qd_max: f64,
    dtau_max: f64,
}

pub fn literature_limits() -> LiteratureLimits {
    let t: BTreeMap<String, LimitRow> = toml::from_str(LITERATURE).expect("bundled limits parse");
    let row = |j: Joint| &t[j.name()];
    LiteratureLimits {
        q_max: std::array::from_fn(|i| row(Joint::ALL[i]).q_max.to_radians()),
        q_min: std::array::from_fn(|i| row(Joint::ALL[i]).q_min.to_radians()),
        qd_max: std::array::from_fn(|i| row(Joint::ALL[i]).qd_max.to_radians()),
        dtau_max: std::array::from_fn(|i| row(Joint::ALL[i]).dtau_max),
    }
}

/// Rigid-body model scaled from the bundled table to the subject, with the
/// joint conventions of the profile's SESC parameters.
pub fn body_model(profile: &SubjectProfile) -> Result<HumanModel> {
    Ok(HumanModel::from_anthropometrics(
        profile.mass,
        profile.height,
        &anthropometric_table(),
        profile.sesc.joints,
    )?)
}

/// Hand CoM in hand-local coordinates: the default load point.
pub fn hand_com(model: &HumanModel) -> [f64; 2] {
    let hand: &Segment = model.link(Joint::Wrist);
    hand.com_offset
}
