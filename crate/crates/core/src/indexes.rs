//! The eight normalized ergonomic indexes, overloading fatigue, risk
//! categories and per-action aggregation.
//!
//! Signed quantities are normalized by magnitude so every index lives on
//! `[0, 1]` while the raw signal stays within its calibrated maximum.
//! Values beyond the maximum are kept as they are.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use libm::{exp, sqrt};

use crate::{Error, Joint, Result, N_JOINTS};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub type JointVector = [f64; N_JOINTS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum IndexKind {
    JointDisplacement,
    JointVelocity,
    JointAcceleration,
    OverloadingTorque,
    OverloadingFatigue,
    OverloadingPower,
    ComPotentialEnergy,
    CompressiveForce,
}

impl IndexKind {
    pub const ALL: [IndexKind; 8] = [
        IndexKind::JointDisplacement,
        IndexKind::JointVelocity,
        IndexKind::JointAcceleration,
        IndexKind::OverloadingTorque,
        IndexKind::OverloadingFatigue,
        IndexKind::OverloadingPower,
        IndexKind::ComPotentialEnergy,
        IndexKind::CompressiveForce,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    /// Short label, `w1` … `w8`.
    pub const fn label(self) -> &'static str {
        match self {
            IndexKind::JointDisplacement => "w1",
            IndexKind::JointVelocity => "w2",
            IndexKind::JointAcceleration => "w3",
            IndexKind::OverloadingTorque => "w4",
            IndexKind::OverloadingFatigue => "w5",
            IndexKind::OverloadingPower => "w6",
            IndexKind::ComPotentialEnergy => "w7",
            IndexKind::CompressiveForce => "w8",
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            IndexKind::JointDisplacement => "joint displacement",
            IndexKind::JointVelocity => "joint velocity",
            IndexKind::JointAcceleration => "joint acceleration",
            IndexKind::OverloadingTorque => "overloading joint torque",
            IndexKind::OverloadingFatigue => "overloading joint fatigue",
            IndexKind::OverloadingPower => "overloading joint power",
            IndexKind::ComPotentialEnergy => "CoM potential energy",
            IndexKind::CompressiveForce => "compressive force",
        }
    }

    pub fn from_label(s: &str) -> Option<IndexKind> {
        Self::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
    }

    /// The CoM potential energy index is the only joint-independent one.
    pub const fn is_per_joint(self) -> bool {
        !matches!(self, IndexKind::ComPotentialEnergy)
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Index values at one instant. Unavailable indexes are `None`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IndexVector {
    pub timestamp: f64,
    per_joint: [Option<JointVector>; 8],
    com_energy: Option<f64>,
}

impl IndexVector {
    pub fn new(timestamp: f64) -> Self {
        Self {
            timestamp,
            per_joint: [None; 8],
            com_energy: None,
        }
    }

    /// Stores a per-joint index. Panics for the CoM index, which is scalar.
    pub fn set(&mut self, kind: IndexKind, values: JointVector) {
        assert!(kind.is_per_joint(), "{kind} is joint-independent");
        self.per_joint[kind.index()] = Some(values);
    }

    pub fn set_com_energy(&mut self, value: f64) {
        self.com_energy = Some(value);
    }

    pub fn joint_values(&self, kind: IndexKind) -> Option<&JointVector> {
        self.per_joint[kind.index()].as_ref()
    }

    pub fn com_energy(&self) -> Option<f64> {
        self.com_energy
    }

    pub fn is_available(&self, kind: IndexKind) -> bool {
        match kind {
            IndexKind::ComPotentialEnergy => self.com_energy.is_some(),
            _ => self.per_joint[kind.index()].is_some(),
        }
    }

    /// Value of `kind` at `joint`; the CoM index reports the same scalar
    /// for every joint.
    pub fn value(&self, kind: IndexKind, joint: Joint) -> Option<f64> {
        match kind {
            IndexKind::ComPotentialEnergy => self.com_energy,
            _ => self.per_joint[kind.index()].map(|v| v[joint.index()]),
        }
    }
}

fn checked_ratio(num: &JointVector, den: &JointVector, what: &'static str) -> Result<JointVector> {
    for (j, d) in den.iter().enumerate() {
        if !(*d > 0.0) {
            return Err(Error::NonPositiveMaximum {
                what,
                joint: Joint::ALL[j],
            });
        }
    }
    Ok(core::array::from_fn(|j| num[j].abs() / den[j]))
}

/// ω1 = |q| ⊘ (q_max − q_min).
pub fn joint_displacement(
    q: &JointVector,
    q_max: &JointVector,
    q_min: &JointVector,
) -> Result<JointVector> {
    let mut range = [0.0; N_JOINTS];
    for j in 0..N_JOINTS {
        range[j] = q_max[j] - q_min[j];
        if !(range[j] > 0.0) {
            return Err(Error::ZeroRange(Joint::ALL[j]));
        }
    }
    Ok(core::array::from_fn(|j| q[j].abs() / range[j]))
}

/// ω2 = |q̇| ⊘ q̇_max.
pub fn joint_velocity_index(qd: &JointVector, qd_max: &JointVector) -> Result<JointVector> {
    checked_ratio(qd, qd_max, "maximum joint velocity")
}

/// ω3 = |q̈| ⊘ q̈_max.
pub fn joint_acceleration_index(qdd: &JointVector, qdd_max: &JointVector) -> Result<JointVector> {
    checked_ratio(qdd, qdd_max, "maximum joint acceleration")
}

/// ω4 = |Δτ| ⊘ Δτ_max.
pub fn overloading_torque_index(dtau: &JointVector, dtau_max: &JointVector) -> Result<JointVector> {
    checked_ratio(dtau, dtau_max, "maximum overloading torque")
}

/// ω5 = τ^F ⊘ τ^F,max.
pub fn fatigue_index(state: &FatigueState, fatigue_max: &JointVector) -> Result<JointVector> {
    checked_ratio(&state.tau, fatigue_max, "maximum overloading fatigue")
}

/// ω6 = ω2 ⊙ ω4, i.e. |q̇ Δτ| / (q̇_max Δτ_max).
pub fn overloading_power_index(w2: &JointVector, w4: &JointVector) -> JointVector {
    core::array::from_fn(|j| w2[j] * w4[j])
}

/// ω7 = |C_z − C⁰_z| / ΔC_max. The potential-energy ratio reduces to this
/// height ratio since `M g` cancels.
pub fn com_energy_index(com_z: f64, neutral_com_z: Option<f64>, dcom_max: f64) -> Result<f64> {
    let neutral = neutral_com_z.ok_or(Error::NeutralNotRegistered)?;
    if !(dcom_max > 0.0) {
        return Err(Error::NonPositive {
            what: "maximum CoM height displacement",
        });
    }
    Ok((com_z - neutral).abs() / dcom_max)
}

/// ω8 = f_C ⊘ f_C,max.
pub fn compressive_force_index(fc: &JointVector, fc_max: &JointVector) -> Result<JointVector> {
    checked_ratio(fc, fc_max, "maximum compressive force")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FatiguePhase {
    Fatiguing,
    #[default]
    Recovering,
}

/// Per-joint parameters of the overloading fatigue model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FatigueParams {
    /// Accumulation rate λ_f [1/s].
    pub rate_fatigue: JointVector,
    /// Recovery rate λ_r [1/s].
    pub rate_recovery: JointVector,
    /// |Δτ| at or above which a joint accumulates fatigue [N·m].
    pub threshold: JointVector,
    /// τ^F,max, the fatigue level reached at endurance [N·m].
    pub max: JointVector,
}

impl FatigueParams {
    pub fn validate(&self) -> Result<()> {
        for j in 0..N_JOINTS {
            let joint = Joint::ALL[j];
            if !(self.rate_fatigue[j] > 0.0) {
                return Err(Error::NonPositiveMaximum {
                    what: "fatigue rate",
                    joint,
                });
            }
            if !(self.rate_recovery[j] > 0.0) {
                return Err(Error::NonPositiveMaximum {
                    what: "recovery rate",
                    joint,
                });
            }
            if !(self.threshold[j] >= 0.0) {
                return Err(Error::NonPositiveMaximum {
                    what: "fatigue threshold",
                    joint,
                });
            }
            if !(self.max[j] > 0.0) {
                return Err(Error::NonPositiveMaximum {
                    what: "maximum fatigue",
                    joint,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FatigueState {
    pub tau: JointVector,
    pub phase: [FatiguePhase; N_JOINTS],
    pub last_update: Option<f64>,
}

impl FatigueState {
    pub fn rested() -> Self {
        Self::default()
    }
}

/// Advances the fatigue state by `dt` seconds of constant `Δτ`.
///
/// While `|Δτ| ≥ θ_f` the state relaxes toward `|Δτ|` at rate λ_f, otherwise
/// it decays toward zero at rate λ_r. The step is the exact solution of the
/// first-order dynamics over the interval, so it stays within
/// `[0, max(τ^F, |Δτ|)]` for any `dt`.
pub fn update_fatigue(
    state: &FatigueState,
    params: &FatigueParams,
    dtau: &JointVector,
    dt: f64,
) -> Result<FatigueState> {
    if dt < 0.0 || dt.is_nan() {
        return Err(Error::NegativeTimeStep(dt));
    }
    let mut next = *state;
    for j in 0..N_JOINTS {
        let load = dtau[j].abs();
        if load >= params.threshold[j] && load > 0.0 {
            let decay = exp(-params.rate_fatigue[j] * dt);
            next.tau[j] = load + (state.tau[j] - load) * decay;
            next.phase[j] = FatiguePhase::Fatiguing;
        } else {
            next.tau[j] = (state.tau[j] * exp(-params.rate_recovery[j] * dt)).max(0.0);
            next.phase[j] = FatiguePhase::Recovering;
        }
    }
    next.last_update = Some(state.last_update.unwrap_or(0.0) + dt);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RiskLevel {
    Green,
    Yellow,
    Red,
}

impl RiskLevel {
    pub const fn name(self) -> &'static str {
        match self {
            RiskLevel::Green => "green",
            RiskLevel::Yellow => "yellow",
            RiskLevel::Red => "red",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Thresholds {
    pub yellow: f64,
    pub red: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            yellow: 1.0 / 3.0,
            red: 2.0 / 3.0,
        }
    }
}

impl Thresholds {
    pub fn new(yellow: f64, red: f64) -> Result<Self> {
        let t = Self { yellow, red };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.yellow && self.yellow < self.red && self.red < 1.0) {
            return Err(Error::InvalidThresholds {
                yellow: self.yellow,
                red: self.red,
            });
        }
        Ok(())
    }

    pub fn level(&self, value: f64) -> RiskLevel {
        if value < self.yellow {
            RiskLevel::Green
        } else if value < self.red {
            RiskLevel::Yellow
        } else {
            RiskLevel::Red
        }
    }
}

/// Risk level per index per joint; `None` where the index is unavailable.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskCategory {
    pub levels: [[Option<RiskLevel>; N_JOINTS]; 8],
}

impl RiskCategory {
    pub fn level(&self, kind: IndexKind, joint: Joint) -> Option<RiskLevel> {
        self.levels[kind.index()][joint.index()]
    }

    /// Highest level over all joints and indexes.
    pub fn worst(&self) -> Option<RiskLevel> {
        self.levels.iter().flatten().flatten().copied().max()
    }
}

pub fn categorize(v: &IndexVector, thresholds: &Thresholds) -> Result<RiskCategory> {
    thresholds.validate()?;
    let levels = core::array::from_fn(|k| {
        let kind = IndexKind::ALL[k];
        core::array::from_fn(|j| v.value(kind, Joint::ALL[j]).map(|x| thresholds.level(x)))
    });
    Ok(RiskCategory { levels })
}

/// Time interval `[start, end]` of one action or phase with its condition label.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ActionWindow {
    pub label: String,
    pub start: f64,
    pub end: f64,
}

impl ActionWindow {
    pub fn new(label: &str, start: f64, end: f64) -> Self {
        Self {
            label: label.into(),
            start,
            end,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

/// Max and RMS of one index at one joint over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct WindowStat {
    pub max: f64,
    pub rms: f64,
    /// Timestamp of the (first) maximum.
    pub argmax_time: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ActionAggregate {
    pub window: ActionWindow,
    /// Indexed by `[IndexKind::index()][Joint::index()]`.
    pub stats: [[Option<WindowStat>; N_JOINTS]; 8],
}

impl ActionAggregate {
    pub fn stat(&self, kind: IndexKind, joint: Joint) -> Option<&WindowStat> {
        self.stats[kind.index()][joint.index()].as_ref()
    }
}

/// Checks that windows are well formed, strictly ordered, non-overlapping
/// and inside `[t_first, t_last]`.
pub fn validate_windows(windows: &[ActionWindow], t_first: f64, t_last: f64) -> Result<()> {
    let mut prev_end = f64::NEG_INFINITY;
    for w in windows {
        if !(w.start.is_finite() && w.end.is_finite() && w.start <= w.end) {
            return Err(Error::InvalidWindow(alloc::format!(
                "'{}' has start after end",
                w.label
            )));
        }
        if w.start <= prev_end {
            return Err(Error::InvalidWindow(alloc::format!(
                "'{}' overlaps the previous window or is out of order",
                w.label
            )));
        }
        if w.start < t_first || w.end > t_last {
            return Err(Error::InvalidWindow(alloc::format!(
                "'{}' [{}, {}] exceeds the stream bounds [{}, {}]",
                w.label,
                w.start,
                w.end,
                t_first,
                t_last
            )));
        }
        prev_end = w.end;
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Accumulator {
    max: f64,
    argmax: f64,
    sum_sq: f64,
    n: usize,
}

impl Accumulator {
    const EMPTY: Accumulator = Accumulator {
        max: f64::NEG_INFINITY,
        argmax: 0.0,
        sum_sq: 0.0,
        n: 0,
    };

    fn push(&mut self, t: f64, x: f64) {
        if x > self.max {
            self.max = x;
            self.argmax = t;
        }
        self.sum_sq += x * x;
        self.n += 1;
    }

    fn finish(&self) -> Option<WindowStat> {
        (self.n > 0).then(|| WindowStat {
            max: self.max,
            rms: sqrt(self.sum_sq / self.n as f64),
            argmax_time: self.argmax,
            samples: self.n,
        })
    }
}

/// Incremental form of [`aggregate`] for index vectors that arrive one at a
/// time in timestamp order.
#[derive(Clone)]
pub struct WindowAggregator {
    windows: Vec<ActionWindow>,
    acc: Vec<[[Accumulator; N_JOINTS]; 8]>,
    counts: Vec<usize>,
    next: usize,
    first: Option<f64>,
    last: Option<f64>,
}

impl WindowAggregator {
    /// Fails when windows are malformed, out of order or overlapping.
    pub fn new(windows: &[ActionWindow]) -> Result<Self> {
        validate_windows(windows, f64::NEG_INFINITY, f64::INFINITY)?;
        Ok(Self {
            windows: windows.to_vec(),
            acc: alloc::vec![[[Accumulator::EMPTY; N_JOINTS]; 8]; windows.len()],
            counts: alloc::vec![0; windows.len()],
            next: 0,
            first: None,
            last: None,
        })
    }

    pub fn push(&mut self, v: &IndexVector) -> Result<()> {
        if !v.timestamp.is_finite() {
            return Err(Error::NonFinite("index timestamp"));
        }
        if let Some(last) = self.last {
            if !(v.timestamp > last) {
                return Err(Error::InvalidWindow(alloc::format!(
                    "index vector at {} s arrived after {} s",
                    v.timestamp,
                    last
                )));
            }
        }
        self.first.get_or_insert(v.timestamp);
        self.last = Some(v.timestamp);
        while self.next < self.windows.len() && self.windows[self.next].end < v.timestamp {
            self.next += 1;
        }
        if let Some(w) = self.windows.get(self.next) {
            if w.contains(v.timestamp) {
                let acc = &mut self.acc[self.next];
                self.counts[self.next] += 1;
                for kind in IndexKind::ALL {
                    for joint in Joint::ALL {
                        if let Some(x) = v.value(kind, joint) {
                            acc[kind.index()][joint.index()].push(v.timestamp, x);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn build(&self, i: usize) -> ActionAggregate {
        let acc = &self.acc[i];
        ActionAggregate {
            window: self.windows[i].clone(),
            stats: core::array::from_fn(|k| core::array::from_fn(|j| acc[k][j].finish())),
        }
    }

    /// Aggregates for every window. Fails when a window lies outside the
    /// observed time span or received no samples.
    pub fn finish(&self) -> Result<Vec<ActionAggregate>> {
        let (first, last) = match (self.first, self.last) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return match self.windows.first() {
                    Some(w) => Err(Error::EmptyWindow(w.label.clone())),
                    None => Ok(Vec::new()),
                }
            }
        };
        validate_windows(&self.windows, first, last)?;
        for (w, n) in self.windows.iter().zip(&self.counts) {
            if *n == 0 {
                return Err(Error::EmptyWindow(w.label.clone()));
            }
        }
        Ok((0..self.windows.len()).map(|i| self.build(i)).collect())
    }

    /// Aggregates for the windows that received samples so far, for
    /// sessions that end early.
    pub fn partial(&self) -> Vec<ActionAggregate> {
        (0..self.windows.len())
            .filter(|&i| self.counts[i] > 0)
            .map(|i| self.build(i))
            .collect()
    }
}

/// Max and RMS of every available index per joint over each window.
/// `stream` must be in timestamp order.
pub fn aggregate(stream: &[IndexVector], windows: &[ActionWindow]) -> Result<Vec<ActionAggregate>> {
    let mut agg = WindowAggregator::new(windows)?;
    for v in stream {
        agg.push(v)?;
    }
    agg.finish()
}
