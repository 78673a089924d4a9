#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ergomon::config::WindowConfig;
use ergomon::frame::{write_frames, KinodynamicFrame, Schema};
use ergomon::profile::{anthropometric_table, hand_com, literature_limits, profile_to_json};
use ergomon_core::calibration::{extract_force_maxima, NeutralPosture, SubjectProfile};
use ergomon_core::dynamics::{inverse_dynamics, ExternalWrench};
use ergomon_core::indexes::{FatigueParams, JointVector};
use ergomon_core::model::{
    forward_kinematics, sesc_com, HumanModel, JointConfiguration, JointDef, SescParameters,
};
use ergomon_core::signal::N_EMG;
use ergomon_core::{Joint, GRAVITY, N_JOINTS};

pub const RATE: f64 = 60.0;
pub const G: f64 = GRAVITY;

pub fn subject_model(mass: f64, height: f64) -> HumanModel {
    HumanModel::from_anthropometrics(
        mass,
        height,
        &anthropometric_table(),
        JointDef::anatomical(),
    )
    .unwrap()
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol,
        "{what}: {a} vs {b} (|diff| = {:e} > {tol:e})",
        (a - b).abs()
    );
}

pub fn joints(v: [f64; N_JOINTS]) -> JointVector {
    v
}

/// Drilling postures at shoulder height, at the waist and low (bent
/// over). The drill, forearm and hand stay horizontal.
pub fn drilling_postures() -> [JointVector; 3] {
    [
        [0.02, 0.05, 0.05, 0.0, 1.5, 0.1, 0.0],
        [0.03, 0.08, 0.1, 0.05, 0.9, 0.7, 0.0],
        [0.15, 0.6, 0.5, 0.4, 1.72, 0.3, 0.0],
    ]
}

/// Unit vector along the hand, hand-local `along` axis in the world.
pub fn hand_axis(model: &HumanModel, cfg: &JointConfiguration) -> [f64; 2] {
    let kin = forward_kinematics(model, cfg).unwrap();
    let a = kin.links[N_JOINTS - 1].axis();
    [a.x, a.y]
}

/// Reaction of a push of `push` newtons along the hand axis, plus part of
/// a tool's weight.
pub fn axial_wrench(
    model: &HumanModel,
    cfg: &JointConfiguration,
    push: f64,
    weight: f64,
) -> ExternalWrench {
    let a = hand_axis(model, cfg);
    ExternalWrench::new(hand_com(model), [-push * a[0], -push * a[1] - weight], 0.0)
}

/// Compressive force limits from a maximal axial push in each drilling posture.
pub fn force_limits(model: &HumanModel) -> JointVector {
    let trial: Vec<(JointConfiguration, ExternalWrench)> = drilling_postures()
        .iter()
        .map(|q| {
            let cfg = JointConfiguration::static_pose(*q);
            let w = axial_wrench(model, &cfg, 250.0, 0.0);
            (cfg, w)
        })
        .collect();
    extract_force_maxima(model, &trial).unwrap()
}

pub fn subject_profile(id: &str, mass: f64, height: f64) -> SubjectProfile {
    let model = subject_model(mass, height);
    let lit = literature_limits();
    let sesc = SescParameters::from_model(&model).unwrap();
    let neutral = JointConfiguration::default();
    SubjectProfile {
        id: id.into(),
        mass,
        height,
        gender: "f".into(),
        q_max: lit.q_max,
        q_min: lit.q_min,
        qd_max: lit.qd_max,
        qdd_max: [40.0, 40.0, 40.0, 30.0, 60.0, 80.0, 80.0],
        dtau_max: lit.dtau_max,
        fatigue: FatigueParams {
            rate_fatigue: [0.05; N_JOINTS],
            rate_recovery: [0.02; N_JOINTS],
            threshold: lit.dtau_max.map(|d| 0.05 * d),
            max: lit.dtau_max.map(|d| 0.5 * d),
        },
        dcom_max: 0.4,
        fc_max: Some(force_limits(&model)),
        mvc: Some([0.5; N_EMG]),
        neutral: Some(NeutralPosture {
            q: neutral.q,
            com_z: sesc_com(&sesc, &neutral).unwrap().y,
        }),
        sesc,
    }
}

/// Frame a force plate and hand sensor would record for a subject following
/// `cfg` while the environment applies `w` to the hand.
pub fn synth_frame(
    model: &HumanModel,
    t: f64,
    cfg: &JointConfiguration,
    w: &ExternalWrench,
    sensor: bool,
) -> KinodynamicFrame {
    let loads = inverse_dynamics(model, cfg, w, None).unwrap();
    let f = loads.ground.predicted_force;
    let m = loads.ground.predicted_moment;
    let b = cfg.base.position;
    let cop_x = b[0] - (m + b[1] * f.x) / f.y;
    KinodynamicFrame {
        timestamp: t,
        q: cfg.q,
        base: None,
        cop: [cop_x, 0.0],
        grf: [f.x, 0.0, f.y],
        grm: None,
        wrench: sensor.then_some([w.force[0], 0.0, w.force[1], 0.0, w.torque, 0.0]),
        emg: None,
    }
}

pub fn synth_trial(
    model: &HumanModel,
    n: usize,
    motion: impl Fn(f64) -> JointConfiguration,
    wrench: impl Fn(f64, &JointConfiguration) -> ExternalWrench,
    sensor: bool,
) -> Vec<KinodynamicFrame> {
    (0..n)
        .map(|i| {
            let t = i as f64 / RATE;
            let cfg = motion(t);
            let w = wrench(t, &cfg);
            synth_frame(model, t, &cfg, &w, sensor)
        })
        .collect()
}

/// `a` for t ≤ t0, `b` for t ≥ t1, a minimum-jerk blend in between.
pub fn blend(a: &JointVector, b: &JointVector, t0: f64, t1: f64, t: f64) -> JointConfiguration {
    let d = t1 - t0;
    let s = ((t - t0) / d).clamp(0.0, 1.0);
    let inside = t > t0 && t < t1;
    let p = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let v = if inside {
        30.0 * s * s * (1.0 - s) * (1.0 - s) / d
    } else {
        0.0
    };
    let acc = if inside {
        60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (d * d)
    } else {
        0.0
    };
    JointConfiguration::new(
        std::array::from_fn(|j| a[j] + (b[j] - a[j]) * p),
        std::array::from_fn(|j| (b[j] - a[j]) * v),
        std::array::from_fn(|j| (b[j] - a[j]) * acc),
    )
}

/// `a + (b − a)(1 − cos 2πft)/2`: starts and ends every cycle at rest in `a`.
pub fn cycle(a: &JointVector, b: &JointVector, f: f64, t: f64) -> JointConfiguration {
    let w = 2.0 * std::f64::consts::PI * f;
    let (s, c) = (w * t).sin_cos();
    JointConfiguration::new(
        std::array::from_fn(|j| a[j] + (b[j] - a[j]) * (1.0 - c) / 2.0),
        std::array::from_fn(|j| (b[j] - a[j]) * w * s / 2.0),
        std::array::from_fn(|j| (b[j] - a[j]) * w * w * c / 2.0),
    )
}

pub fn window(label: &str, condition: &str, start: f64, end: f64) -> WindowConfig {
    WindowConfig {
        label: label.into(),
        condition: Some(condition.into()),
        start,
        end,
    }
}

pub const WEIGHTS: [f64; 3] = [2.5, 5.0, 10.0];
pub const HEIGHTS: [&str; 3] = ["low", "mid", "high"];
/// Each height block: two lifts at 0.25 Hz.
pub const LIFT_BLOCK: f64 = 8.0;

pub fn standing_with_box() -> JointVector {
    [0.02, 0.05, 0.05, 0.0, 0.5, 1.2, 0.0]
}

pub fn pickup(height: usize, scale: f64) -> JointVector {
    let q = match height {
        0 => [0.35, 1.2, 0.9, 0.6, 0.95, 0.2, 0.0],
        1 => [0.15, 0.5, 0.4, 0.4, 0.7, 0.4, 0.0],
        _ => [0.05, 0.1, 0.1, 0.1, 1.2, 0.6, 0.0],
    };
    let s = standing_with_box();
    std::array::from_fn(|j| s[j] + (q[j] - s[j]) * scale)
}

/// Lifting trial with a box of `kg`: one block per height level, the box
/// held throughout.
pub fn lifting_trial(
    model: &HumanModel,
    kg: f64,
    scale: f64,
) -> (Vec<KinodynamicFrame>, Vec<WindowConfig>) {
    let n = (3.0 * LIFT_BLOCK * RATE) as usize + 1;
    let stand = standing_with_box();
    let frames = synth_trial(
        model,
        n,
        |t| {
            let k = ((t / LIFT_BLOCK) as usize).min(2);
            cycle(&stand, &pickup(k, scale), 0.25, t - k as f64 * LIFT_BLOCK)
        },
        |_, _| ExternalWrench::vertical_load(hand_com(model), kg * G),
        false,
    );
    let windows = HEIGHTS
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let t0 = k as f64 * LIFT_BLOCK;
            window(
                &format!("{kg}kg-{h}"),
                &format!("{kg}kg"),
                t0 + 0.5,
                t0 + LIFT_BLOCK - 0.5,
            )
        })
        .collect();
    (frames, windows)
}

/// Drilling trial: 10 s at each panel with 5 s moves in between. While
/// drilling the hand is pushed back along its axis and the panel carries
/// most of the tool.
pub fn drilling_trial(
    model: &HumanModel,
    push: f64,
    tool_kg: f64,
) -> (Vec<KinodynamicFrame>, Vec<WindowConfig>) {
    let p = drilling_postures();
    let n = (45.0 * RATE) as usize;
    let motion = |t: f64| {
        let k = ((t / 15.0) as usize).min(2);
        let t0 = k as f64 * 15.0;
        if k == 0 || t >= t0 + 5.0 {
            JointConfiguration::static_pose(p[k])
        } else {
            blend(&p[k - 1], &p[k], t0, t0 + 5.0, t)
        }
    };
    let frames = synth_trial(
        model,
        n,
        motion,
        |t, cfg| {
            let local = t % 15.0;
            let drilling = if t < 15.0 { local < 10.0 } else { local >= 5.0 };
            if drilling {
                axial_wrench(model, cfg, push, 0.3 * tool_kg * G)
            } else {
                ExternalWrench::vertical_load(hand_com(model), tool_kg * G)
            }
        },
        true,
    );
    let windows = vec![
        window("high", "high", 0.5, 9.5),
        window("waist", "waist", 20.5, 29.5),
        window("low", "low", 35.5, 44.5),
    ];
    (frames, windows)
}

pub fn paint_postures() -> [JointVector; 2] {
    [
        [0.02, 0.05, 0.05, 0.05, 1.9, 0.3, 0.0],
        [0.02, 0.05, 0.05, 0.05, 0.3, 0.9, 0.0],
    ]
}

pub const PHASE: f64 = 60.0;
pub const MOVE: f64 = 10.0;

/// Painting trial: a static phase per helmet holding a light tool, with a
/// move between them.
pub fn painting_trial(
    model: &HumanModel,
    tool_kg: f64,
) -> (Vec<KinodynamicFrame>, Vec<WindowConfig>) {
    let [a, b] = paint_postures();
    let n = ((2.0 * PHASE + MOVE) * RATE) as usize + 1;
    let frames = synth_trial(
        model,
        n,
        |t| blend(&a, &b, PHASE, PHASE + MOVE, t),
        |_, _| ExternalWrench::vertical_load(hand_com(model), tool_kg * G),
        false,
    );
    let windows = vec![
        window("phase1", "phase1", 0.0, PHASE),
        window("phase2", "phase2", PHASE + MOVE, 2.0 * PHASE + MOVE),
    ];
    (frames, windows)
}

pub struct TrialFiles {
    pub label: String,
    pub frames: Vec<KinodynamicFrame>,
    pub windows: Vec<WindowConfig>,
}

impl TrialFiles {
    pub fn new(label: &str, (frames, windows): (Vec<KinodynamicFrame>, Vec<WindowConfig>)) -> Self {
        Self {
            label: label.into(),
            frames,
            windows,
        }
    }
}

pub fn frames_csv(frames: &[KinodynamicFrame]) -> String {
    let f = &frames[0];
    let schema = Schema::canonical(
        f.base.is_some(),
        f.grm.is_some(),
        f.wrench.is_some(),
        f.emg.is_some(),
    );
    write_frames(&schema, frames)
}

/// Writes a profile, one CSV per trial and a session config into `dir`;
/// returns the config path. `extra` holds additional top-level TOML.
pub fn write_session(
    dir: &Path,
    profile: &SubjectProfile,
    mode: &str,
    extra: &str,
    trials: &[TrialFiles],
) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("profile.json"), profile_to_json(profile)).unwrap();
    let mut cfg =
        format!("profile = \"profile.json\"\nmode = \"{mode}\"\nrate = {RATE:?}\n{extra}\n");
    for t in trials {
        let file = format!("{}.csv", t.label);
        std::fs::write(dir.join(&file), frames_csv(&t.frames)).unwrap();
        let _ = write!(
            cfg,
            "\n[[trial]]\nlabel = \"{}\"\ninput = \"{file}\"\n",
            t.label
        );
        for w in &t.windows {
            let _ = write!(
                cfg,
                "\n[[trial.window]]\nlabel = \"{}\"\ncondition = \"{}\"\nstart = {:?}\nend = {:?}\n",
                w.label,
                w.condition(),
                w.start,
                w.end
            );
        }
    }
    let path = dir.join("session.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

pub fn joint_index(name: &str) -> usize {
    Joint::from_name(name).unwrap().index()
}
