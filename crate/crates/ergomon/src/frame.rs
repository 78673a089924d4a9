//! Columnar text schema for kinodynamic frames.
//!
//! The first non-comment line names the columns; every following line holds
//! one sample. Cells are separated by commas, `#` starts a comment line and
//! an empty cell (or `nan`) marks a missing value.

use std::fmt;

use ergomon_core::indexes::JointVector;
use ergomon_core::signal::{EMG_CHANNELS, N_EMG};
use ergomon_core::N_JOINTS;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const TIME_COLUMN: &str = "t";
pub const JOINT_COLUMNS: [&str; N_JOINTS] = [
    "q_ankle",
    "q_knee",
    "q_hip",
    "q_back",
    "q_shoulder",
    "q_elbow",
    "q_wrist",
];
pub const BASE_COLUMNS: [&str; 3] = ["base_x", "base_z", "base_pitch"];
pub const COP_COLUMNS: [&str; 2] = ["cop_x", "cop_y"];
pub const GRF_COLUMNS: [&str; 3] = ["grf_x", "grf_y", "grf_z"];
pub const GRM_COLUMNS: [&str; 3] = ["grm_x", "grm_y", "grm_z"];
pub const WRENCH_COLUMNS: [&str; 6] = ["f_x", "f_y", "f_z", "m_x", "m_y", "m_z"];

/// One synchronized sample. Positions in metres, angles in radians, forces
/// in newtons, moments in N·m, EMG as normalized activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinodynamicFrame {
    pub timestamp: f64,
    pub q: JointVector,
    /// Ankle position `(x, z)` and foot pitch in the sagittal plane.
    pub base: Option<[f64; 3]>,
    /// Force-plate CoP `(x, y)` in the world frame.
    pub cop: [f64; 2],
    pub grf: [f64; 3],
    pub grm: Option<[f64; 3]>,
    /// Hand wrench `(f_x, f_y, f_z, m_x, m_y, m_z)` in the world frame,
    /// exerted by the environment on the hand.
    pub wrench: Option<[f64; 6]>,
    pub emg: Option<[f64; N_EMG]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Time,
    Joints,
    Base,
    Cop,
    Grf,
    Grm,
    Wrench,
    Emg,
}

impl Group {
    const ALL: [Group; 8] = [
        Group::Time,
        Group::Joints,
        Group::Base,
        Group::Cop,
        Group::Grf,
        Group::Grm,
        Group::Wrench,
        Group::Emg,
    ];

    fn width(self) -> usize {
        match self {
            Group::Time => 1,
            Group::Joints => N_JOINTS,
            Group::Base | Group::Grf | Group::Grm => 3,
            Group::Cop => 2,
            Group::Wrench => 6,
            Group::Emg => N_EMG,
        }
    }

    fn required(self) -> bool {
        matches!(self, Group::Time | Group::Joints | Group::Cop | Group::Grf)
    }

    fn column(self, slot: usize) -> String {
        match self {
            Group::Time => TIME_COLUMN.into(),
            Group::Joints => JOINT_COLUMNS[slot].into(),
            Group::Base => BASE_COLUMNS[slot].into(),
            Group::Cop => COP_COLUMNS[slot].into(),
            Group::Grf => GRF_COLUMNS[slot].into(),
            Group::Grm => GRM_COLUMNS[slot].into(),
            Group::Wrench => WRENCH_COLUMNS[slot].into(),
            Group::Emg => format!("emg_{}", EMG_CHANNELS[slot]),
        }
    }

    fn lookup(name: &str) -> Option<(Group, usize)> {
        Group::ALL.iter().find_map(|g| {
            (0..g.width())
                .find(|&s| g.column(s) == name)
                .map(|s| (*g, s))
        })
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Group::Time => "time",
            Group::Joints => "joint angles",
            Group::Base => "base pose",
            Group::Cop => "CoP",
            Group::Grf => "GRF",
            Group::Grm => "GRM",
            Group::Wrench => "hand wrench",
            Group::Emg => "EMG",
        };
        f.write_str(s)
    }
}

/// Column layout decoded from a header line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<(Group, usize)>,
    names: Vec<String>,
}

impl Schema {
    pub fn parse_header(line: &str, line_no: usize) -> Result<Schema> {
        let mut columns = Vec::new();
        let mut names: Vec<String> = Vec::new();
        for cell in line.split(',') {
            let name = cell.trim();
            let Some(col) = Group::lookup(name) else {
                return Err(Error::parse(line_no, format!("unknown channel '{name}'")));
            };
            if names.iter().any(|n| n == name) {
                return Err(Error::parse(line_no, format!("duplicate channel '{name}'")));
            }
            names.push(name.to_string());
            columns.push(col);
        }
        for g in Group::ALL {
            let present = columns.iter().filter(|(h, _)| *h == g).count();
            if present == 0 && g.required() {
                return Err(Error::parse(
                    line_no,
                    format!("missing required {g} channels"),
                ));
            }
            if present != 0 && present != g.width() {
                return Err(Error::parse(
                    line_no,
                    format!(
                        "{g} channels must be given together ({present} of {})",
                        g.width()
                    ),
                ));
            }
        }
        Ok(Schema { columns, names })
    }

    /// Header for the given optional groups, in canonical column order.
    pub fn canonical(base: bool, grm: bool, wrench: bool, emg: bool) -> Schema {
        let mut header = Vec::new();
        for g in Group::ALL {
            let on = match g {
                Group::Base => base,
                Group::Grm => grm,
                Group::Wrench => wrench,
                Group::Emg => emg,
                _ => true,
            };
            if on {
                header.extend((0..g.width()).map(|s| g.column(s)));
            }
        }
        Schema::parse_header(&header.join(","), 1).expect("canonical header is valid")
    }

    pub fn has(&self, group: Group) -> bool {
        self.columns.iter().any(|(g, _)| *g == group)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn header(&self) -> String {
        self.names.join(",")
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Splits a data line into cells; `None` marks a missing value.
    pub fn parse_row(&self, line: &str, line_no: usize) -> Result<Vec<Option<f64>>> {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != self.columns.len() {
            return Err(Error::parse(
                line_no,
                format!(
                    "expected {} cells, found {}",
                    self.columns.len(),
                    cells.len()
                ),
            ));
        }
        cells
            .iter()
            .zip(&self.names)
            .map(|(cell, name)| {
                let c = cell.trim();
                if c.is_empty() || c.eq_ignore_ascii_case("nan") {
                    return Ok(None);
                }
                match c.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Some(v)),
                    _ => Err(Error::parse(
                        line_no,
                        format!("bad value '{c}' in column '{name}'"),
                    )),
                }
            })
            .collect()
    }

    /// Builds a frame from a complete row. Fails naming the first missing cell.
    pub fn frame(&self, row: &[Option<f64>], line_no: usize) -> Result<KinodynamicFrame> {
        let mut f = KinodynamicFrame {
            timestamp: 0.0,
            q: [0.0; N_JOINTS],
            base: self.has(Group::Base).then_some([0.0; 3]),
            cop: [0.0; 2],
            grf: [0.0; 3],
            grm: self.has(Group::Grm).then_some([0.0; 3]),
            wrench: self.has(Group::Wrench).then_some([0.0; 6]),
            emg: self.has(Group::Emg).then_some([0.0; N_EMG]),
        };
        for (k, &(g, s)) in self.columns.iter().enumerate() {
            let v = row[k].ok_or_else(|| {
                Error::parse(
                    line_no,
                    format!("missing value in column '{}'", self.names[k]),
                )
            })?;
            match g {
                Group::Time => f.timestamp = v,
                Group::Joints => f.q[s] = v,
                Group::Base => f.base.as_mut().unwrap()[s] = v,
                Group::Cop => f.cop[s] = v,
                Group::Grf => f.grf[s] = v,
                Group::Grm => f.grm.as_mut().unwrap()[s] = v,
                Group::Wrench => f.wrench.as_mut().unwrap()[s] = v,
                Group::Emg => f.emg.as_mut().unwrap()[s] = v,
            }
        }
        Ok(f)
    }

    /// Cells of `frame` in this schema's column order.
    pub fn cells(&self, frame: &KinodynamicFrame) -> Vec<f64> {
        self.columns
            .iter()
            .map(|&(g, s)| match g {
                Group::Time => frame.timestamp,
                Group::Joints => frame.q[s],
                Group::Base => frame.base.map_or(f64::NAN, |b| b[s]),
                Group::Cop => frame.cop[s],
                Group::Grf => frame.grf[s],
                Group::Grm => frame.grm.map_or(f64::NAN, |b| b[s]),
                Group::Wrench => frame.wrench.map_or(f64::NAN, |b| b[s]),
                Group::Emg => frame.emg.map_or(f64::NAN, |b| b[s]),
            })
            .collect()
    }

    /// Data line for `frame`. Values are written in shortest round-trip
    /// form, so parsing the line gives the frame back bit for bit.
    pub fn format_row(&self, frame: &KinodynamicFrame) -> String {
        self.cells(frame)
            .iter()
            .map(|v| {
                if v.is_nan() {
                    String::new()
                } else {
                    format!("{v:?}")
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// True for lines that carry no data.
pub fn is_blank_or_comment(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

/// Writes a header and one line per frame.
pub fn write_frames(schema: &Schema, frames: &[KinodynamicFrame]) -> String {
    let mut out = schema.header();
    out.push('\n');
    for f in frames {
        out.push_str(&schema.format_row(f));
        out.push('\n');
    }
    out
}
