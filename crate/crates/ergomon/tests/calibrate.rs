mod common;

use std::path::Path;

use common::*;
use ergomon::calibrate::{calibrate, CalibrationConfig};
use ergomon::frame::KinodynamicFrame;
use ergomon::Error;
use ergomon_core::calibration::{endurance_time, extract_force_maxima};
use ergomon_core::dynamics::ExternalWrench;
use ergomon_core::indexes::JointVector;
use ergomon_core::model::{sesc_com, whole_body_com, JointConfiguration, SescParameters};
use ergomon_core::{Joint, N_JOINTS};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const HOLD: f64 = 3.0;
const MOVE: f64 = 1.5;
const AMPLITUDE: JointVector = [0.2, 0.6, 0.8, 0.7, 1.4, 1.2, 0.5];

fn holds() -> Vec<JointVector> {
    let mut r = StdRng::seed_from_u64(11);
    let mut v = vec![[0.0; N_JOINTS]];
    v.extend((0..24).map(|_| std::array::from_fn(|_| r.random_range(-0.6..0.6))));
    v
}

fn static_trial(model: &ergomon_core::model::HumanModel) -> Vec<KinodynamicFrame> {
    let h = holds();
    let block = HOLD + MOVE;
    let n = (h.len() as f64 * block * RATE) as usize;
    synth_trial(
        model,
        n,
        |t| {
            let k = ((t / block) as usize).min(h.len() - 1);
            let next = h.get(k + 1).unwrap_or(&h[k]);
            let t0 = k as f64 * block + HOLD;
            blend(&h[k], next, t0, t0 + MOVE, t)
        },
        |_, _| ExternalWrench::none(),
        false,
    )
}

fn motion_trial(model: &ergomon_core::model::HumanModel) -> Vec<KinodynamicFrame> {
    synth_trial(
        model,
        (8.0 * RATE) as usize,
        |t| cycle(&[0.0; N_JOINTS], &AMPLITUDE, 0.5, t),
        |_, _| ExternalWrench::none(),
        false,
    )
}

const FORCE_BLOCK: f64 = 3.0;

fn force_motion(t: f64) -> JointConfiguration {
    let d = drilling_postures();
    let block = FORCE_BLOCK;
    let k = ((t / block) as usize).min(2);
    let next = d.get(k + 1).unwrap_or(&d[k]);
    let t0 = k as f64 * block + 2.0;
    blend(&d[k], next, t0, t0 + 1.0, t)
}

fn force_wrench(
    model: &ergomon_core::model::HumanModel,
    t: f64,
    cfg: &JointConfiguration,
) -> ExternalWrench {
    let push = if (0.25..=1.75).contains(&(t % FORCE_BLOCK)) {
        250.0
    } else {
        0.0
    };
    axial_wrench(model, cfg, push, 0.0)
}

fn force_trial(model: &ergomon_core::model::HumanModel) -> Vec<KinodynamicFrame> {
    synth_trial(
        model,
        (3.0 * FORCE_BLOCK * RATE) as usize,
        force_motion,
        |t, cfg| force_wrench(model, t, cfg),
        true,
    )
}

fn met_points() -> Vec<[f64; 2]> {
    [40.0, 50.0, 65.0, 80.0]
        .iter()
        .map(|&l| [l, endurance_time(l, 30.0, 0.03).unwrap()])
        .collect()
}

fn write_calibration(dir: &Path, mass: f64, height: f64, extra: &str) -> std::path::PathBuf {
    let model = subject_model(mass, height);
    std::fs::write(dir.join("static.csv"), frames_csv(&static_trial(&model))).unwrap();
    std::fs::write(dir.join("motion.csv"), frames_csv(&motion_trial(&model))).unwrap();
    std::fs::write(dir.join("force.csv"), frames_csv(&force_trial(&model))).unwrap();
    let prior = SescParameters::from_model(&model).unwrap().coeffs[2 * N_JOINTS];
    let met: Vec<String> = met_points()
        .iter()
        .map(|p| format!("[{:?}, {:?}]", p[0], p[1]))
        .collect();
    let text = format!(
        "id = \"C1\"\nmass = {mass:?}\nheight = {height:?}\nrate = {RATE:?}\n{extra}\n\
         [static]\ninput = \"static.csv\"\nbase_along_prior = {prior:?}\n\n\
         [motion]\ninput = \"motion.csv\"\n\n[force]\ninput = \"force.csv\"\n\n\
         [fatigue]\nmet = {{ shoulder = [{}] }}\ndefault = {{ rate = 0.05, max_fraction = 0.5 }}\n",
        met.join(", ")
    );
    let path = dir.join("calibration.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn calibration_recovers_the_subject() {
    let dir = tempfile::tempdir().unwrap();
    let (mass, height) = (68.0, 1.72);
    let model = subject_model(mass, height);
    let path = write_calibration(dir.path(), mass, height, "");
    let (profile, summary) = calibrate(&CalibrationConfig::load(&path).unwrap()).unwrap();

    assert_eq!(summary.static_holds, holds().len());
    assert!(summary.unexcited.is_empty());
    let mut r = StdRng::seed_from_u64(12);
    for _ in 0..100 {
        let cfg =
            JointConfiguration::static_pose(std::array::from_fn(|_| r.random_range(-0.6..0.6)));
        let d = sesc_com(&profile.sesc, &cfg).unwrap() - whole_body_com(&model, &cfg).unwrap();
        assert!(d.norm() < 1e-3, "CoM error {} m", d.norm());
    }
    let neutral = profile.neutral.unwrap();
    assert_eq!(neutral.q, [0.0; N_JOINTS]);

    let w = std::f64::consts::PI;
    for j in 0..N_JOINTS {
        assert_close(
            profile.qd_max[j],
            AMPLITUDE[j] * w / 2.0,
            0.03 * AMPLITUDE[j] * w / 2.0,
            "peak speed",
        );
        assert_close(
            profile.qdd_max[j],
            AMPLITUDE[j] * w * w / 2.0,
            0.05 * AMPLITUDE[j] * w * w / 2.0,
            "peak acceleration",
        );
    }
    let top = JointConfiguration::static_pose(AMPLITUDE);
    let dz = (whole_body_com(&model, &top).unwrap().y
        - whole_body_com(&model, &JointConfiguration::default())
            .unwrap()
            .y)
        .abs();
    assert_close(profile.dcom_max, dz, 2e-3, "CoM excursion");

    let exact: Vec<_> = (0..(3.0 * FORCE_BLOCK * RATE) as usize)
        .map(|i| {
            let t = i as f64 / RATE;
            let cfg = force_motion(t);
            (cfg, force_wrench(&model, t, &cfg))
        })
        .collect();
    let want = extract_force_maxima(&model, &exact).unwrap();
    for j in 0..N_JOINTS {
        assert_close(
            profile.fc_max.unwrap()[j],
            want[j],
            0.01 * want[j].abs(),
            "compressive force limit",
        );
    }

    let s = Joint::Shoulder.index();
    assert_close(profile.fatigue.rate_fatigue[s], 0.03, 1e-6, "shoulder λ_f");
    assert_close(profile.fatigue.max[s], 30.0, 1e-4, "shoulder τ max");
    assert_close(
        profile.fatigue.rate_recovery[s],
        0.4 * 0.03,
        1e-6,
        "shoulder λ_r",
    );
    let e = Joint::Elbow.index();
    assert_eq!(profile.fatigue.rate_fatigue[e], 0.05);
    assert_eq!(profile.fatigue.max[e], 0.5 * profile.dtau_max[e]);
    assert!(summary.fatigue_residual_rms[s] < 1e-3);
}

#[test]
fn calibration_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_calibration(dir.path(), 70.0, 1.75, "");
    let text = std::fs::read_to_string(&path).unwrap();

    let no_default = text.replace("default = { rate = 0.05, max_fraction = 0.5 }\n", "");
    std::fs::write(&path, &no_default).unwrap();
    let err = calibrate(&CalibrationConfig::load(&path).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");

    let bad_joint = text.replace("shoulder = [", "shoulders = [");
    std::fs::write(&path, &bad_joint).unwrap();
    let err = calibrate(&CalibrationConfig::load(&path).unwrap()).unwrap_err();
    assert!(err.to_string().contains("shoulders"), "{err}");

    let weak = text.replace("[40.0, ", "[1.0, 1.0], [40.0, ");
    std::fs::write(&path, &weak).unwrap();
    let err = calibrate(&CalibrationConfig::load(&path).unwrap()).unwrap_err();
    assert!(err.to_string().contains("threshold"), "{err}");

    std::fs::write(
        &path,
        text.replace("[motion]\ninput = \"motion.csv\"\n", ""),
    )
    .unwrap();
    let err = calibrate(&CalibrationConfig::load(&path).unwrap()).unwrap_err();
    assert!(err.to_string().contains("qdd_max"), "{err}");

    std::fs::write(&path, text.replace("mass", "weight")).unwrap();
    assert!(CalibrationConfig::load(&path).is_err());
}
