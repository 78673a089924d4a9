//! Profile building from calibration trials.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ergomon_core::calibration::*;
use ergomon_core::dynamics::ExternalWrench;
use ergomon_core::indexes::{FatigueParams, JointVector};
use ergomon_core::model::{sesc_com, BaseState, JointConfiguration, JointDef};
use ergomon_core::signal::{differentiate, DifferentiatorSpec, N_EMG};
use ergomon_core::{Joint, N_JOINTS};
use serde::{Deserialize, Serialize};

use crate::config::{Projection, DEFAULT_RATE};
use crate::frame::KinodynamicFrame;
use crate::ingest::load_frames;
use crate::profile::{anthropometric_table, hand_com, literature_limits};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointConvention {
    #[default]
    Anatomical,
    Stacked,
}

impl JointConvention {
    pub fn defs(self) -> [JointDef; N_JOINTS] {
        match self {
            JointConvention::Anatomical => JointDef::anatomical(),
            JointConvention::Stacked => JointDef::stacked(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticTrial {
    pub input: PathBuf,
    #[serde(default)]
    pub max_rate: Option<f64>,
    #[serde(default)]
    pub min_duration: Option<f64>,
    /// Seconds dropped from both ends of every detected hold.
    #[serde(default = "default_trim")]
    pub trim: f64,
    /// Which detected hold is the neutral posture.
    #[serde(default)]
    pub neutral: usize,
    #[serde(default)]
    pub base_along_prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialInput {
    pub input: PathBuf,
}

/// Per-joint overrides. Angles in degrees, speeds in deg/s,
/// accelerations in deg/s², torques in N·m, CoM excursion in metres.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub q_max: Option<JointVector>,
    pub q_min: Option<JointVector>,
    pub qd_max: Option<JointVector>,
    pub qdd_max: Option<JointVector>,
    pub dtau_max: Option<JointVector>,
    pub dcom_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strength {
    /// Experimental Δτ_max [N·m].
    pub dtau_max: JointVector,
    #[serde(default = "default_band")]
    pub band: f64,
}

fn default_trim() -> f64 {
    0.1
}

fn default_band() -> f64 {
    DEFAULT_TORQUE_BAND
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FatigueDefault {
    /// λ_f [1/s]
    pub rate: f64,
    /// τ^F,max as a fraction of Δτ_max.
    pub max_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FatigueConfig {
    pub recovery_ratio: Option<f64>,
    pub threshold_fraction: Option<f64>,
    /// `(load [N·m], endurance [s])` pairs per joint name.
    pub met: BTreeMap<String, Vec<[f64; 2]>>,
    /// Used for joints without MET data.
    pub default: Option<FatigueDefault>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub id: String,
    pub mass: f64,
    pub height: f64,
    #[serde(default)]
    pub gender: String,
    #[serde(default)]
    pub joints: JointConvention,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default)]
    pub mvc: Option<[f64; N_EMG]>,
    #[serde(default)]
    pub projection: Projection,
    #[serde(default)]
    pub load_point: Option<[f64; 2]>,
    #[serde(rename = "static")]
    pub static_trial: StaticTrial,
    #[serde(default)]
    pub motion: Option<TrialInput>,
    #[serde(default)]
    pub force: Option<TrialInput>,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub strength: Option<Strength>,
    #[serde(default)]
    pub fatigue: FatigueConfig,
}

fn default_rate() -> f64 {
    DEFAULT_RATE
}

impl CalibrationConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c: CalibrationConfig =
            toml::from_str(&text).map_err(|e| Error::format(path, Error::Config(e.to_string())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        join(&mut c.static_trial.input);
        if let Some(m) = &mut c.motion {
            join(&mut m.input);
        }
        if let Some(f) = &mut c.force {
            join(&mut f.input);
        }
        Ok(c)
    }
}

/// What the calibration found besides the profile itself.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSummary {
    pub static_holds: usize,
    pub sesc_residual_rms: f64,
    pub sesc_condition: f64,
    /// Joints whose speed limit fell back to the literature value.
    pub unexcited: Vec<Joint>,
    pub fatigue_residual_rms: JointVector,
}

fn configurations(
    frames: &[KinodynamicFrame],
    proj: &Projection,
    rate: f64,
) -> Result<Vec<JointConfiguration>> {
    let spec = DifferentiatorSpec::default();
    let mut out: Vec<JointConfiguration> = frames
        .iter()
        .map(|f| {
            let b = f.base.unwrap_or([proj.base[0], proj.base[1], 0.0]);
            let mut base = BaseState::at(b[0], b[1]);
            base.pitch = b[2];
            JointConfiguration::static_pose(f.q).with_base(base)
        })
        .collect();
    for j in 0..N_JOINTS {
        let series: Vec<f64> = frames.iter().map(|f| f.q[j]).collect();
        let d = differentiate(&series, rate, spec)?;
        for (i, c) in out.iter_mut().enumerate() {
            c.qd[j] = d.first[i];
            c.qdd[j] = d.second[i];
        }
    }
    Ok(out)
}

fn to_rad(v: JointVector) -> JointVector {
    v.map(f64::to_radians)
}

pub fn calibrate(c: &CalibrationConfig) -> Result<(SubjectProfile, CalibrationSummary)> {
    let joints = c.joints.defs();
    let lit = literature_limits();
    let table = anthropometric_table();
    let model =
        ergomon_core::model::HumanModel::from_anthropometrics(c.mass, c.height, &table, joints)?;

    // SESC from the static holds
    let st = load_frames(&c.static_trial.input, c.rate)?.frames;
    let cfgs = configurations(&st, &c.projection, c.rate)?;
    let mut opts = StaticPoseOptions::default();
    if let Some(r) = c.static_trial.max_rate {
        opts.max_rate = r;
    }
    if let Some(d) = c.static_trial.min_duration {
        opts.min_duration = d;
    }
    let times: Vec<f64> = st.iter().map(|f| f.timestamp).collect();
    let qd: Vec<JointVector> = cfgs.iter().map(|c| c.qd).collect();
    let trim = c.static_trial.trim;
    if !(trim >= 0.0) {
        return Err(Error::Config(format!(
            "static.trim must be non-negative, got {trim}"
        )));
    }
    let segments: Vec<(usize, usize)> = detect_static_segments(&times, &qd, &opts)?
        .into_iter()
        .filter_map(|(s, e)| {
            let s = (s..=e).find(|&i| times[i] - times[s] >= trim)?;
            let e = (s..=e).rev().find(|&i| times[e] - times[i] >= trim)?;
            (times[e] - times[s] >= opts.min_duration).then_some((s, e))
        })
        .collect();
    let q: Vec<JointVector> = st.iter().map(|f| f.q).collect();
    let cop: Vec<f64> = st
        .iter()
        .zip(&cfgs)
        .map(|(f, cfg)| c.projection.cop(f.cop) - cfg.base.position[0])
        .collect();
    let poses = static_poses(&q, &cop, &segments)?;
    let fit = fit_sesc(
        &poses,
        &joints,
        &SescFitOptions {
            base_along_prior: c.static_trial.base_along_prior,
            ..Default::default()
        },
    )?;
    let neutral_pose = poses.get(c.static_trial.neutral).ok_or_else(|| {
        Error::Config(format!(
            "static trial has {} holds, no hold {}",
            poses.len(),
            c.static_trial.neutral
        ))
    })?;
    let (ns, _) = segments[c.static_trial.neutral];
    let mut ncfg = neutral_pose.cfg;
    ncfg.base = BaseState::at(cfgs[ns].base.position[0], cfgs[ns].base.position[1]);
    let neutral = NeutralPosture {
        q: ncfg.q,
        com_z: sesc_com(&fit.params, &ncfg)?.y,
    };

    // speeds, accelerations and CoM excursion
    let mut qd_max = c.limits.qd_max.map(to_rad);
    let mut qdd_max = c.limits.qdd_max.map(to_rad);
    let mut dcom_max = c.limits.dcom_max;
    let mut unexcited = Vec::new();
    if let Some(m) = &c.motion {
        let frames = load_frames(&m.input, c.rate)?.frames;
        let mq: Vec<JointVector> = frames.iter().map(|f| f.q).collect();
        let com_z = frames
            .iter()
            .map(|f| {
                let b = f
                    .base
                    .unwrap_or([c.projection.base[0], c.projection.base[1], 0.0]);
                let mut base = BaseState::at(b[0], b[1]);
                base.pitch = b[2];
                Ok(sesc_com(
                    &fit.params,
                    &JointConfiguration::static_pose(f.q).with_base(base),
                )?
                .y)
            })
            .collect::<Result<Vec<f64>>>()?;
        let km = extract_kinematic_maxima(
            &mq,
            &com_z,
            neutral.com_z,
            c.rate,
            &KinematicMaximaOptions::default(),
        )?;
        let mut qd = km.qd_max;
        let mut qdd = km.qdd_max;
        for j in &km.unexcited {
            qd[j.index()] = lit.qd_max[j.index()];
            qdd[j.index()] = qdd_max.map_or(f64::NAN, |v| v[j.index()]);
        }
        unexcited = km.unexcited;
        qd_max.get_or_insert(qd);
        qdd_max.get_or_insert(qdd);
        dcom_max.get_or_insert(km.dcom_max);
    }
    let qd_max = qd_max.unwrap_or(lit.qd_max);
    let qdd_max = qdd_max.ok_or_else(|| {
        Error::Config("joint acceleration limits need a [motion] trial or limits.qdd_max".into())
    })?;
    if qdd_max.iter().any(|v| v.is_nan()) {
        return Err(Error::Config(
            "the motion trial leaves joints unexcited; give limits.qdd_max".into(),
        ));
    }
    let dcom_max = dcom_max.ok_or_else(|| {
        Error::Config("CoM excursion needs a [motion] trial or limits.dcom_max".into())
    })?;

    // torque limits
    let literature_dtau = c.limits.dtau_max.unwrap_or(lit.dtau_max);
    let dtau_max = match &c.strength {
        Some(s) => resolve_torque_maxima(&s.dtau_max, &literature_dtau, s.band)?,
        None => literature_dtau,
    };

    // fatigue
    let mut fopts = FatigueFitOptions::default();
    if let Some(r) = c.fatigue.recovery_ratio {
        fopts.recovery_ratio = r;
    }
    if let Some(t) = c.fatigue.threshold_fraction {
        fopts.threshold_fraction = t;
    }
    for name in c.fatigue.met.keys() {
        if Joint::from_name(name).is_none() {
            return Err(Error::Config(format!(
                "fatigue.met: unknown joint '{name}'"
            )));
        }
    }
    let mut params = FatigueParams {
        rate_fatigue: [0.0; N_JOINTS],
        rate_recovery: [0.0; N_JOINTS],
        threshold: dtau_max.map(|d| fopts.threshold_fraction * d),
        max: [0.0; N_JOINTS],
    };
    let mut residual = [0.0; N_JOINTS];
    for j in Joint::ALL {
        let obs: Vec<MetObservation> = c
            .fatigue
            .met
            .get(j.name())
            .map(|v| {
                v.iter()
                    .map(|p| MetObservation {
                        load: p[0],
                        endurance: p[1],
                    })
                    .collect()
            })
            .unwrap_or_default();
        let i = j.index();
        if obs.is_empty() {
            let d = c.fatigue.default.ok_or_else(|| {
                Error::Config(format!("no MET data for the {j} and no [fatigue.default]"))
            })?;
            params.rate_fatigue[i] = d.rate;
            params.max[i] = d.max_fraction * dtau_max[i];
        } else {
            if let Some(o) = obs.iter().find(|o| o.load < params.threshold[i]) {
                return Err(Error::Config(format!(
                    "{j}: MET load {} N·m is below the fatigue threshold",
                    o.load
                )));
            }
            let f = fit_fatigue_joint(&obs)?;
            params.rate_fatigue[i] = f.rate_fatigue;
            params.max[i] = f.max;
            residual[i] = f.residual_rms;
        }
        params.rate_recovery[i] = fopts.recovery_ratio * params.rate_fatigue[i];
    }
    params.validate()?;

    // compressive force limits
    let fc_max = match &c.force {
        Some(f) => {
            let frames = load_frames(&f.input, c.rate)?.frames;
            let cfgs = configurations(&frames, &c.projection, c.rate)?;
            let point = c.load_point.unwrap_or_else(|| hand_com(&model));
            let trial = frames
                .iter()
                .zip(cfgs)
                .map(|(fr, cfg)| {
                    let w = fr.wrench.ok_or_else(|| {
                        Error::Config("force trial needs the hand wrench channels".into())
                    })?;
                    let wrench = ExternalWrench::new(
                        point,
                        c.projection.force([w[0], w[1], w[2]]),
                        c.projection.moment([w[3], w[4], w[5]]),
                    );
                    Ok((cfg, wrench))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(extract_force_maxima(&model, &trial)?)
        }
        None => None,
    };

    let profile = SubjectProfile {
        id: c.id.clone(),
        mass: c.mass,
        height: c.height,
        gender: c.gender.clone(),
        q_max: c.limits.q_max.map(to_rad).unwrap_or(lit.q_max),
        q_min: c.limits.q_min.map(to_rad).unwrap_or(lit.q_min),
        qd_max,
        qdd_max,
        dtau_max,
        fatigue: params,
        dcom_max,
        fc_max,
        mvc: c.mvc,
        sesc: fit.params.clone(),
        neutral: Some(neutral),
    };
    profile.validate()?;
    Ok((
        profile,
        CalibrationSummary {
            static_holds: poses.len(),
            sesc_residual_rms: fit.residual_rms,
            sesc_condition: fit.condition,
            unexcited,
            fatigue_residual_rms: residual,
        },
    ))
}
