//! Subject calibration: SESC identification, index maxima and fatigue parameters.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use nalgebra::{DMatrix, DVector};

use crate::dynamics::{compressive_forces, ExternalWrench};
use crate::indexes::{FatigueParams, JointVector};
use crate::linalg::least_squares;
use crate::model::{
    sesc_regressor, HumanModel, JointConfiguration, JointDef, SescParameters, SESC_LEN,
};
use crate::signal::{differentiate, DifferentiatorSpec, N_EMG};
use crate::{Error, Joint, Result, N_JOINTS};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Index of the vertical base-body coefficient, which flat-ground CoP data
/// cannot observe.
const BASE_ALONG: usize = 2 * N_JOINTS;

/// Neutral posture recorded at the start of a session or calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NeutralPosture {
    pub q: JointVector,
    /// CoM height in the neutral posture [m].
    pub com_z: f64,
}

/// Everything the index computation needs to know about one subject.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SubjectProfile {
    pub id: String,
    /// [kg]
    pub mass: f64,
    /// [m]
    pub height: f64,
    pub gender: String,
    pub q_max: JointVector,
    pub q_min: JointVector,
    pub qd_max: JointVector,
    pub qdd_max: JointVector,
    /// Δτ_max [N·m]
    pub dtau_max: JointVector,
    pub fatigue: FatigueParams,
    /// ΔC_max [m]
    pub dcom_max: f64,
    /// f_C,max [N]; needed only when a full wrench is measured.
    #[cfg_attr(feature = "serde", serde(default))]
    pub fc_max: Option<JointVector>,
    /// MVC per sEMG channel; needed only for sEMG benchmarking.
    #[cfg_attr(feature = "serde", serde(default))]
    pub mvc: Option<[f64; N_EMG]>,
    pub sesc: SescParameters,
    #[cfg_attr(feature = "serde", serde(default))]
    pub neutral: Option<NeutralPosture>,
}

fn check_positive(v: &JointVector, what: &'static str) -> Result<()> {
    for (j, x) in v.iter().enumerate() {
        if !(*x > 0.0) || !x.is_finite() {
            return Err(Error::NonPositiveMaximum {
                what,
                joint: Joint::ALL[j],
            });
        }
    }
    Ok(())
}

impl SubjectProfile {
    /// Checks the invariants that hold for every profile regardless of the
    /// task mode.
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::NonPositive {
                what: "subject mass",
            });
        }
        if !(self.height > 0.0) || !self.height.is_finite() {
            return Err(Error::NonPositive {
                what: "subject height",
            });
        }
        for j in 0..N_JOINTS {
            if !(self.q_max[j] > self.q_min[j])
                || !self.q_max[j].is_finite()
                || !self.q_min[j].is_finite()
            {
                return Err(Error::ZeroRange(Joint::ALL[j]));
            }
        }
        check_positive(&self.qd_max, "maximum joint velocity")?;
        check_positive(&self.qdd_max, "maximum joint acceleration")?;
        check_positive(&self.dtau_max, "maximum overloading torque")?;
        self.fatigue.validate()?;
        if !(self.dcom_max > 0.0) || !self.dcom_max.is_finite() {
            return Err(Error::NonPositive {
                what: "maximum CoM height displacement",
            });
        }
        if let Some(fc) = &self.fc_max {
            check_positive(fc, "maximum compressive force")?;
        }
        if let Some(mvc) = &self.mvc {
            if mvc.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
                return Err(Error::NonPositive { what: "MVC" });
            }
        }
        if let Some(n) = &self.neutral {
            if n.q.iter().any(|v| !v.is_finite()) || !n.com_z.is_finite() {
                return Err(Error::NonFinite("neutral posture"));
            }
        }
        SescParameters::new(self.sesc.joints, self.sesc.coeffs.clone())?;
        Ok(())
    }

    /// Names of the optional fields that are absent although required.
    pub fn missing_fields(&self, needs_force_maxima: bool, needs_mvc: bool) -> Vec<&'static str> {
        let mut out = Vec::new();
        if needs_force_maxima && self.fc_max.is_none() {
            out.push("fc_max");
        }
        if needs_mvc && self.mvc.is_none() {
            out.push("mvc");
        }
        out
    }
}

/// Label of a SESC coefficient, e.g. `along[knee]` or `perp[base]`.
pub fn sesc_parameter_name(k: usize) -> String {
    let part = if k.is_multiple_of(2) { "along" } else { "perp" };
    let body = if k / 2 < N_JOINTS {
        Joint::ALL[k / 2].name()
    } else {
        "base"
    };
    format!("{part}[{body}]")
}

/// One statically held posture and the CoP measured during it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticPose {
    pub cfg: JointConfiguration,
    /// Sagittal CoP [m].
    pub cop_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SescFitOptions {
    /// Largest accepted condition number of the regressor.
    pub max_condition: f64,
    /// Value used for the vertical base-body coefficient, which CoP
    /// measurements on flat ground do not excite.
    pub base_along_prior: f64,
}

impl Default for SescFitOptions {
    fn default() -> Self {
        Self {
            max_condition: 1e6,
            base_along_prior: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SescFit {
    pub params: SescParameters,
    /// RMS of the CoP residual over the training poses [m].
    pub residual_rms: f64,
    pub condition: f64,
}

/// Number of SESC coefficients identified from CoP data.
pub const SESC_FITTED: usize = SESC_LEN - 1;

/// Least-squares SESC identification from static poses: each pose gives
/// `cop_x = x_base + Φ_x(q)·p`.
pub fn fit_sesc(
    poses: &[StaticPose],
    joints: &[JointDef; N_JOINTS],
    options: &SescFitOptions,
) -> Result<SescFit> {
    if poses.len() < SESC_FITTED {
        return Err(Error::TooFewSamples {
            needed: SESC_FITTED,
            got: poses.len(),
        });
    }
    let cols: Vec<usize> = (0..SESC_LEN).filter(|&k| k != BASE_ALONG).collect();
    let mut a = DMatrix::zeros(poses.len(), SESC_FITTED);
    let mut b = DVector::zeros(poses.len());
    for (r, pose) in poses.iter().enumerate() {
        pose.cfg.validate()?;
        if !pose.cop_x.is_finite() {
            return Err(Error::NonFinite("calibration CoP"));
        }
        let phi = sesc_regressor(joints, &pose.cfg).phi;
        for (c, &k) in cols.iter().enumerate() {
            a[(r, c)] = phi[(0, k)];
        }
        b[r] = pose.cop_x
            - pose.cfg.base.position[0]
            - phi[(0, BASE_ALONG)] * options.base_along_prior;
    }
    let ls = least_squares(&a, &b, options.max_condition);
    if !ls.is_well_conditioned() {
        let mut names: Vec<String> = Vec::new();
        for dir in &ls.weak_directions {
            let peak = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (c, v) in dir.iter().enumerate() {
                let name = sesc_parameter_name(cols[c]);
                if v.abs() >= 0.1 * peak && !names.contains(&name) {
                    names.push(name);
                }
            }
        }
        return Err(Error::RankDeficient(names));
    }
    let residual = &a * &ls.solution - &b;
    let residual_rms = sqrt(residual.norm_squared() / poses.len() as f64);
    let mut coeffs = alloc::vec![0.0; SESC_LEN];
    for (c, &k) in cols.iter().enumerate() {
        coeffs[k] = ls.solution[c];
    }
    coeffs[BASE_ALONG] = options.base_along_prior;
    Ok(SescFit {
        params: SescParameters::new(*joints, coeffs)?,
        residual_rms,
        condition: ls.condition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StaticPoseOptions {
    /// Largest joint speed still considered static [rad/s].
    pub max_rate: f64,
    /// Shortest hold accepted [s].
    pub min_duration: f64,
}

impl Default for StaticPoseOptions {
    fn default() -> Self {
        Self {
            max_rate: 0.05,
            min_duration: 0.5,
        }
    }
}

/// Maximal runs of samples with `‖q̇‖∞ < max_rate` lasting at least
/// `min_duration`, as inclusive index ranges.
pub fn detect_static_segments(
    times: &[f64],
    qd: &[JointVector],
    options: &StaticPoseOptions,
) -> Result<Vec<(usize, usize)>> {
    if times.len() != qd.len() {
        return Err(Error::DimensionMismatch {
            what: "joint velocity samples",
            expected: times.len(),
            got: qd.len(),
        });
    }
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let close = |s: usize, e: usize, out: &mut Vec<(usize, usize)>| {
        if times[e] - times[s] >= options.min_duration {
            out.push((s, e));
        }
    };
    for (i, v) in qd.iter().enumerate() {
        let still = v.iter().all(|x| x.abs() < options.max_rate);
        match (still, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                close(s, i - 1, &mut out);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        close(s, times.len() - 1, &mut out);
    }
    Ok(out)
}

/// Averages the configuration and CoP over each static segment.
pub fn static_poses(
    q: &[JointVector],
    cop_x: &[f64],
    segments: &[(usize, usize)],
) -> Result<Vec<StaticPose>> {
    if q.len() != cop_x.len() {
        return Err(Error::DimensionMismatch {
            what: "CoP samples",
            expected: q.len(),
            got: cop_x.len(),
        });
    }
    segments
        .iter()
        .map(|&(s, e)| {
            if s > e || e >= q.len() {
                return Err(Error::InvalidWindow(format!("static segment {s}..={e}")));
            }
            let n = (e - s + 1) as f64;
            let mut mean = [0.0; N_JOINTS];
            for row in &q[s..=e] {
                for j in 0..N_JOINTS {
                    mean[j] += row[j] / n;
                }
            }
            let cop = cop_x[s..=e].iter().sum::<f64>() / n;
            Ok(StaticPose {
                cfg: JointConfiguration::static_pose(mean),
                cop_x: cop,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicMaxima {
    pub qd_max: JointVector,
    pub qdd_max: JointVector,
    pub dcom_max: f64,
    /// Joints whose peak speed stayed below the excitation threshold.
    pub unexcited: Vec<Joint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct KinematicMaximaOptions {
    pub differentiator: DifferentiatorSpec,
    /// Peak speed a joint must reach to count as excited [rad/s].
    pub excitation_threshold: f64,
}

impl Default for KinematicMaximaOptions {
    fn default() -> Self {
        Self {
            differentiator: DifferentiatorSpec::default(),
            excitation_threshold: 0.05,
        }
    }
}

/// Peak filtered joint speed and acceleration, and the largest vertical CoM
/// excursion from the neutral height, over a calibration trial sampled at `fs`.
pub fn extract_kinematic_maxima(
    q: &[JointVector],
    com_z: &[f64],
    neutral_com_z: f64,
    fs: f64,
    options: &KinematicMaximaOptions,
) -> Result<KinematicMaxima> {
    if q.len() != com_z.len() {
        return Err(Error::DimensionMismatch {
            what: "CoM height samples",
            expected: q.len(),
            got: com_z.len(),
        });
    }
    if !neutral_com_z.is_finite() || com_z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("CoM height"));
    }
    let mut qd_max = [0.0; N_JOINTS];
    let mut qdd_max = [0.0; N_JOINTS];
    for j in 0..N_JOINTS {
        let series: Vec<f64> = q.iter().map(|r| r[j]).collect();
        let d = differentiate(&series, fs, options.differentiator)?;
        qd_max[j] = d.first.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        qdd_max[j] = d.second.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    let unexcited = Joint::ALL
        .iter()
        .copied()
        .filter(|j| !(qd_max[j.index()] >= options.excitation_threshold))
        .collect();
    let dcom_max = com_z
        .iter()
        .fold(0.0f64, |m, z| m.max((z - neutral_com_z).abs()));
    Ok(KinematicMaxima {
        qd_max,
        qdd_max,
        dcom_max,
        unexcited,
    })
}

/// Default relative comparability band for torque maxima.
pub const DEFAULT_TORQUE_BAND: f64 = 0.2;

/// Keeps the experimental torque maximum when it lies within `band` (relative
/// to the literature value) of the literature value, and the smaller of the
/// two otherwise.
pub fn resolve_torque_maxima(
    experimental: &JointVector,
    literature: &JointVector,
    band: f64,
) -> Result<JointVector> {
    if !(band >= 0.0) || !band.is_finite() {
        return Err(Error::NonPositive {
            what: "comparability band",
        });
    }
    check_positive(experimental, "experimental torque maximum")?;
    check_positive(literature, "literature torque maximum")?;
    Ok(core::array::from_fn(|j| {
        let (e, l) = (experimental[j], literature[j]);
        if (e - l).abs() <= band * l {
            e
        } else {
            e.min(l)
        }
    }))
}

/// Sustained |Δτ| level and the time it could be held.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MetObservation {
    /// [N·m]
    pub load: f64,
    /// [s]
    pub endurance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FatigueFitOptions {
    /// λ_r / λ_f when no recovery data is available.
    pub recovery_ratio: f64,
    /// θ_f / Δτ_max.
    pub threshold_fraction: f64,
}

impl Default for FatigueFitOptions {
    fn default() -> Self {
        Self {
            recovery_ratio: 0.4,
            threshold_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointFatigueFit {
    /// λ_f [1/s]
    pub rate_fatigue: f64,
    /// τ^F,max [N·m]
    pub max: f64,
    /// RMS endurance-time residual [s].
    pub residual_rms: f64,
}

/// Time for the fatigue state to climb from rest to `max` under a constant
/// load, or `None` when the load never reaches it.
pub fn endurance_time(load: f64, max: f64, rate_fatigue: f64) -> Option<f64> {
    (load > max && max > 0.0 && rate_fatigue > 0.0).then(|| -log(1.0 - max / load) / rate_fatigue)
}

fn met_profile(obs: &[MetObservation], tau_max: f64) -> (f64, f64) {
    // for a fixed τ^F,max the best 1/λ_f is linear least squares
    let g: Vec<f64> = obs.iter().map(|o| -log(1.0 - tau_max / o.load)).collect();
    let gg: f64 = g.iter().map(|v| v * v).sum();
    let mu = obs
        .iter()
        .zip(&g)
        .map(|(o, g)| o.endurance * g)
        .sum::<f64>()
        / gg;
    let sse = obs
        .iter()
        .zip(&g)
        .map(|(o, g)| {
            let r = o.endurance - mu * g;
            r * r
        })
        .sum();
    (mu, sse)
}

/// Fits λ_f and τ^F,max of one joint to MET points, so that the endurance
/// time of the fatigue model from rest matches the observed times.
pub fn fit_fatigue_joint(obs: &[MetObservation]) -> Result<JointFatigueFit> {
    for o in obs {
        if !(o.load > 0.0)
            || !(o.endurance > 0.0)
            || !o.load.is_finite()
            || !o.endurance.is_finite()
        {
            return Err(Error::InvalidObservation(format!(
                "load {} N·m held for {} s",
                o.load, o.endurance
            )));
        }
    }
    let mut levels: Vec<f64> = obs.iter().map(|o| o.load).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.len() < 2 {
        return Err(Error::InsufficientObservations);
    }
    let l_min = levels[0];

    // golden-section search on the profiled objective
    let inv_phi = (sqrt(5.0) - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, l_min);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = met_profile(obs, x1).1;
    let mut f2 = met_profile(obs, x2).1;
    for _ in 0..200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = met_profile(obs, x1).1;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = met_profile(obs, x2).1;
        }
        if hi - lo <= 1e-15 * l_min {
            break;
        }
    }
    let mut tau = 0.5 * (lo + hi);
    let (mut mu, mut sse) = met_profile(obs, tau);

    // Gauss–Newton polish on (τ^F,max, 1/λ_f)
    for _ in 0..50 {
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for o in obs {
            let g = -log(1.0 - tau / o.load);
            let dg = 1.0 / (o.load - tau);
            let r = o.endurance - mu * g;
            let jac = [mu * dg, g];
            for a in 0..2 {
                jtr[a] += jac[a] * r;
                for b in 0..2 {
                    jtj[a][b] += jac[a] * jac[b];
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if !(det.abs() > 0.0) {
            break;
        }
        let step = [
            (jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det,
            (jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det,
        ];
        let (nt, nm) = (tau + step[0], mu + step[1]);
        if !(nt > 0.0 && nt < l_min && nm > 0.0) {
            break;
        }
        let nsse: f64 = obs
            .iter()
            .map(|o| {
                let r = o.endurance + nm * log(1.0 - nt / o.load);
                r * r
            })
            .sum();
        if !(nsse < sse) {
            break;
        }
        tau = nt;
        mu = nm;
        sse = nsse;
    }
    if !(mu > 0.0) || !(tau > 0.0) {
        return Err(Error::InvalidObservation(
            "endurance times do not decrease with load".into(),
        ));
    }
    Ok(JointFatigueFit {
        rate_fatigue: 1.0 / mu,
        max: tau,
        residual_rms: sqrt(sse / obs.len() as f64),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FatigueFit {
    pub params: FatigueParams,
    pub residual_rms: JointVector,
}

/// Per-joint MET fit. Recovery rates follow `recovery_ratio · λ_f` and the
/// activation thresholds `threshold_fraction · Δτ_max`.
pub fn fit_fatigue_params(
    observations: &[Vec<MetObservation>; N_JOINTS],
    dtau_max: &JointVector,
    options: &FatigueFitOptions,
) -> Result<FatigueFit> {
    if !(options.recovery_ratio > 0.0) {
        return Err(Error::NonPositive {
            what: "recovery ratio",
        });
    }
    if !(options.threshold_fraction >= 0.0) {
        return Err(Error::NonPositive {
            what: "threshold fraction",
        });
    }
    check_positive(dtau_max, "maximum overloading torque")?;
    let mut params = FatigueParams {
        rate_fatigue: [0.0; N_JOINTS],
        rate_recovery: [0.0; N_JOINTS],
        threshold: [0.0; N_JOINTS],
        max: [0.0; N_JOINTS],
    };
    let mut residual_rms = [0.0; N_JOINTS];
    for j in 0..N_JOINTS {
        let threshold = options.threshold_fraction * dtau_max[j];
        if let Some(o) = observations[j].iter().find(|o| o.load < threshold) {
            return Err(Error::InvalidObservation(format!(
                "{}: load {} N·m is below the fatigue threshold {threshold} N·m",
                Joint::ALL[j],
                o.load
            )));
        }
        let fit = fit_fatigue_joint(&observations[j])?;
        params.rate_fatigue[j] = fit.rate_fatigue;
        params.rate_recovery[j] = options.recovery_ratio * fit.rate_fatigue;
        params.threshold[j] = threshold;
        params.max[j] = fit.max;
        residual_rms[j] = fit.residual_rms;
    }
    params.validate()?;
    Ok(FatigueFit {
        params,
        residual_rms,
    })
}

/// Per-joint peak compressive force over a maximal-exertion trial.
pub fn extract_force_maxima(
    model: &HumanModel,
    trial: &[(JointConfiguration, ExternalWrench)],
) -> Result<JointVector> {
    if trial.is_empty() {
        return Err(Error::EmptyWindow("force calibration trial".into()));
    }
    if trial.iter().all(|(_, w)| w.is_zero()) {
        return Err(Error::NoExertion);
    }
    let mut max = [0.0f64; N_JOINTS];
    for (cfg, wrench) in trial {
        let fc = compressive_forces(model, cfg, wrench, None)?;
        for j in 0..N_JOINTS {
            max[j] = max[j].max(fc.0[j]);
        }
    }
    check_positive(&max, "maximum compressive force")?;
    Ok(max)
}

/// Closed-form fatigue state after holding `load` for `t` seconds from rest.
pub fn fatigue_from_rest(load: f64, rate_fatigue: f64, t: f64) -> f64 {
    load * (1.0 - exp(-rate_fatigue * t))
}
