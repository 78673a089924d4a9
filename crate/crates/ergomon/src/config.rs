//! Session configuration (TOML).

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use ergomon_core::indexes::{ActionWindow, Thresholds};
use ergomon_core::signal::DifferentiatorSpec;
use ergomon_core::stats::{AnovaOptions, Correction, DEFAULT_ALPHA};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_RATE: f64 = 60.0;

/// How the external load at the hand is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskMode {
    /// Vertical load estimated from the force plate; no full wrench.
    LoadEstimation,
    /// Hand wrench measured by a force/torque sensor.
    MeasuredWrench,
    /// Known tool weight, or the force-plate estimate when no weight is given.
    LightTool,
}

impl TaskMode {
    pub fn name(self) -> &'static str {
        match self {
            TaskMode::LoadEstimation => "load-estimation",
            TaskMode::MeasuredWrench => "measured-wrench",
            TaskMode::LightTool => "light-tool",
        }
    }

    pub fn needs_wrench(self) -> bool {
        self == TaskMode::MeasuredWrench
    }
}

impl fmt::Display for TaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Horizontal plane reduction onto the sagittal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Projection {
    /// Direction the subject faces, counter-clockwise from world +x [deg].
    pub heading_deg: f64,
    /// Point of the sagittal plane in world `(x, y)` [m].
    pub origin: [f64; 2],
    /// Ankle position `(x, z)` in the sagittal plane when frames carry no base pose [m].
    pub base: [f64; 2],
}

impl Default for Projection {
    fn default() -> Self {
        Self {
            heading_deg: 0.0,
            origin: [0.0, 0.0],
            base: [0.0, 0.0],
        }
    }
}

impl Projection {
    fn axes(&self) -> ([f64; 2], [f64; 2]) {
        let h = self.heading_deg.to_radians();
        let (s, c) = h.sin_cos();
        ([c, s], [-s, c])
    }

    /// Sagittal coordinate of a world `(x, y)` point.
    pub fn cop(&self, p: [f64; 2]) -> f64 {
        let (fwd, _) = self.axes();
        (p[0] - self.origin[0]) * fwd[0] + (p[1] - self.origin[1]) * fwd[1]
    }

    /// Sagittal `(x, z)` components of a world force.
    pub fn force(&self, f: [f64; 3]) -> [f64; 2] {
        let (fwd, _) = self.axes();
        [f[0] * fwd[0] + f[1] * fwd[1], f[2]]
    }

    /// Moment about the lateral axis of the sagittal plane.
    pub fn moment(&self, m: [f64; 3]) -> f64 {
        let (_, lat) = self.axes();
        m[0] * lat[0] + m[1] * lat[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionName {
    #[default]
    None,
    Bonferroni,
    Holm,
}

impl From<CorrectionName> for Correction {
    fn from(c: CorrectionName) -> Self {
        match c {
            CorrectionName::None => Correction::None,
            CorrectionName::Bonferroni => Correction::Bonferroni,
            CorrectionName::Holm => Correction::Holm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub alpha: f64,
    pub sphericity_correction: bool,
    pub correction: CorrectionName,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            sphericity_correction: false,
            correction: CorrectionName::None,
        }
    }
}

impl StatsConfig {
    pub fn anova(&self) -> AnovaOptions {
        AnovaOptions {
            alpha: self.alpha,
            sphericity_correction: self.sphericity_correction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub label: String,
    /// Condition the window belongs to; defaults to the label.
    #[serde(default)]
    pub condition: Option<String>,
    pub start: f64,
    pub end: f64,
}

impl WindowConfig {
    pub fn condition(&self) -> &str {
        self.condition.as_deref().unwrap_or(&self.label)
    }

    pub fn action_window(&self) -> ActionWindow {
        ActionWindow::new(&self.label, self.start, self.end)
    }
}

/// Raw sEMG recorded separately at its native rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmgInput {
    pub path: PathBuf,
    /// [Hz]
    pub rate: f64,
    /// Session time of the first sample [s].
    #[serde(default)]
    pub start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub label: String,
    pub input: PathBuf,
    #[serde(default)]
    pub emg: Option<EmgInput>,
    #[serde(default, rename = "window")]
    pub windows: Vec<WindowConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub json: bool,
    pub text: bool,
    pub polar_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            json: true,
            text: true,
            polar_csv: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub profile: PathBuf,
    pub mode: TaskMode,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    /// Load application point in hand-local `(along, perp)` coordinates [m];
    /// defaults to the hand CoM.
    #[serde(default)]
    pub load_point: Option<[f64; 2]>,
    /// Tool mass for light-tool sessions [kg].
    #[serde(default)]
    pub tool_mass: Option<f64>,
    #[serde(default)]
    pub projection: Projection,
    #[serde(default)]
    pub differentiator: Option<DifferentiatorSpec>,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(rename = "trial")]
    pub trials: Vec<TrialConfig>,
}

fn default_rate() -> f64 {
    DEFAULT_RATE
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SessionConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::format(path, e))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, dir: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        join(&mut self.profile);
        for t in &mut self.trials {
            join(&mut t.input);
            if let Some(e) = &mut t.emg {
                join(&mut e.path);
            }
        }
        if let Some(d) = &mut self.output.dir {
            join(d);
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds.unwrap_or_default()
    }

    pub fn spec(&self) -> DifferentiatorSpec {
        self.differentiator.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(Error::Config(format!(
                "rate must be positive, got {}",
                self.rate
            )));
        }
        self.thresholds().validate()?;
        self.spec().validate()?;
        if let Some(m) = self.tool_mass {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::Config(format!(
                    "tool_mass must be non-negative, got {m}"
                )));
            }
        }
        if self
            .load_point
            .is_some_and(|p| p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Config("load_point must be finite".into()));
        }
        if !self.projection.heading_deg.is_finite() {
            return Err(Error::Config("projection heading must be finite".into()));
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.stats.alpha
            )));
        }
        if self.trials.is_empty() {
            return Err(Error::Config("at least one [[trial]] is required".into()));
        }
        let mut labels = BTreeSet::new();
        for t in &self.trials {
            if !labels.insert(t.label.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate trial label '{}'",
                    t.label
                )));
            }
            if t.windows.is_empty() {
                return Err(Error::Config(format!(
                    "trial '{}' defines no windows",
                    t.label
                )));
            }
            let windows: Vec<ActionWindow> =
                t.windows.iter().map(WindowConfig::action_window).collect();
            ergomon_core::indexes::validate_windows(&windows, f64::NEG_INFINITY, f64::INFINITY)
                .map_err(|e| Error::Config(format!("trial '{}': {e}", t.label)))?;
            if let Some(e) = &t.emg {
                if !(e.rate > 0.0) || !e.start.is_finite() {
                    return Err(Error::Config(format!(
                        "trial '{}': invalid EMG rate or start",
                        t.label
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fails naming the first referenced file that does not exist.
    pub fn check_files(&self) -> Result<()> {
        let mut paths = vec![&self.profile];
        for t in &self.trials {
            paths.push(&t.input);
            if let Some(e) = &t.emg {
                paths.push(&e.path);
            }
        }
        for p in paths {
            if !p.is_file() {
                return Err(Error::Config(format!("file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    /// Condition labels in order of first appearance.
    pub fn conditions(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for w in self.trials.iter().flat_map(|t| &t.windows) {
            if !out.iter().any(|c| c == w.condition()) {
                out.push(w.condition().to_string());
            }
        }
        out
    }
}
