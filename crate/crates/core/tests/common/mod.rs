#![allow(dead_code)]

use ergomon_core::model::{AnthropometricRow, HumanModel, JointConfiguration, JointDef, Segment};
use ergomon_core::N_JOINTS;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const G: f64 = 9.80665;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn row(name: &str, mass: f64, length: f64, along: f64, perp: f64, gyr: f64) -> AnthropometricRow {
    AnthropometricRow {
        name: name.into(),
        mass_fraction: mass,
        length_fraction: length,
        com_along_fraction: along,
        com_perp_fraction: perp,
        gyration_fraction: gyr,
    }
}

pub fn table() -> [AnthropometricRow; N_JOINTS + 1] {
    [
        row("foot", 0.029, 0.152, 0.2, 0.25, 0.475),
        row("shank", 0.093, 0.246, 0.567, 0.0, 0.302),
        row("thigh", 0.2, 0.245, 0.567, 0.0, 0.323),
        row("pelvis", 0.142, 0.1, 0.5, 0.0, 0.4),
        row("trunk", 0.436, 0.188, 0.8, 0.0, 0.6),
        row("upper arm", 0.056, 0.186, 0.436, 0.0, 0.322),
        row("forearm", 0.032, 0.146, 0.43, 0.0, 0.303),
        row("hand", 0.012, 0.108, 0.506, 0.0, 0.297),
    ]
}

pub fn adult(joints: [JointDef; N_JOINTS]) -> HumanModel {
    HumanModel::from_anthropometrics(75.0, 1.75, &table(), joints).unwrap()
}

pub fn random_model(r: &mut impl Rng, joints: [JointDef; N_JOINTS]) -> HumanModel {
    let seg = |r: &mut dyn rand::RngCore, name: &str| {
        let length = r.random_range(0.1..0.5);
        let along = r.random_range(0.0..0.8) * length;
        let perp = r.random_range(-0.1..0.1) * length;
        Segment::new(
            name,
            length,
            r.random_range(0.3..30.0),
            [along, perp],
            r.random_range(0.0..0.3),
        )
    };
    let base = seg(r, "foot");
    let links = (0..N_JOINTS).map(|_| seg(r, "link")).collect();
    HumanModel::new(base, links, joints).unwrap()
}

pub fn random_joints(r: &mut impl Rng) -> [JointDef; N_JOINTS] {
    let mut j = JointDef::stacked();
    for d in &mut j {
        d.sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        d.offset = r.random_range(-0.5..0.5);
    }
    j
}

pub fn random_vec(r: &mut impl Rng, lo: f64, hi: f64) -> [f64; N_JOINTS] {
    std::array::from_fn(|_| r.random_range(lo..hi))
}

pub fn random_cfg(r: &mut impl Rng, dynamic: bool) -> JointConfiguration {
    let q = random_vec(r, -1.2, 1.2);
    let mut cfg = JointConfiguration::static_pose(q);
    cfg.base.position = [r.random_range(-0.5..0.5), r.random_range(0.0..0.2)];
    cfg.base.pitch = r.random_range(-0.2..0.2);
    if dynamic {
        cfg.qd = random_vec(r, -2.0, 2.0);
        cfg.qdd = random_vec(r, -5.0, 5.0);
        cfg.base.velocity = [r.random_range(-0.3..0.3), r.random_range(-0.3..0.3)];
        cfg.base.pitch_rate = r.random_range(-0.5..0.5);
        cfg.base.acceleration = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        cfg.base.pitch_acceleration = r.random_range(-1.0..1.0);
    }
    cfg
}

/// Plain-trigonometry forward kinematics: absolute angles, joint origins
/// (index 0 = ankle … 6 = wrist, 7 = hand tip) and segment CoMs
/// (index 0 = foot, 1..=7 links).
pub struct Pose {
    pub angles: [f64; N_JOINTS + 1],
    pub joints: [[f64; 2]; N_JOINTS + 1],
    pub coms: [[f64; 2]; N_JOINTS + 1],
}

pub fn local_to_world(origin: [f64; 2], phi: f64, along: f64, perp: f64) -> [f64; 2] {
    [
        origin[0] + along * phi.sin() + perp * phi.cos(),
        origin[1] + along * phi.cos() - perp * phi.sin(),
    ]
}

pub fn pose(model: &HumanModel, cfg: &JointConfiguration) -> Pose {
    let mut angles = [0.0; N_JOINTS + 1];
    angles[0] = cfg.base.pitch;
    for i in 0..N_JOINTS {
        let d = model.joints()[i];
        angles[i + 1] = angles[i] + d.sign * cfg.q[i] + d.offset;
    }
    let mut joints = [[0.0; 2]; N_JOINTS + 1];
    let mut coms = [[0.0; 2]; N_JOINTS + 1];
    let foot = model.base_body();
    coms[0] = local_to_world(
        cfg.base.position,
        angles[0],
        foot.com_offset[0],
        foot.com_offset[1],
    );
    joints[0] = cfg.base.position;
    for i in 0..N_JOINTS {
        let s = &model.links()[i];
        let phi = angles[i + 1];
        coms[i + 1] = local_to_world(joints[i], phi, s.com_offset[0], s.com_offset[1]);
        joints[i + 1] = local_to_world(joints[i], phi, s.length, 0.0);
    }
    Pose {
        angles,
        joints,
        coms,
    }
}

pub fn masses(model: &HumanModel) -> [f64; N_JOINTS + 1] {
    let mut m = [model.base_body().mass; N_JOINTS + 1];
    for i in 0..N_JOINTS {
        m[i + 1] = model.links()[i].mass;
    }
    m
}

pub fn brute_com(model: &HumanModel, cfg: &JointConfiguration) -> [f64; 2] {
    let p = pose(model, cfg);
    let m = masses(model);
    let total: f64 = m.iter().sum();
    let mut c = [0.0; 2];
    for k in 0..=N_JOINTS {
        c[0] += m[k] * p.coms[k][0] / total;
        c[1] += m[k] * p.coms[k][1] / total;
    }
    c
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol,
        "{what}: {a} vs {b} (|diff| = {:e} > {tol:e})",
        (a - b).abs()
    );
}

pub fn seeded() -> StdRng {
    rng(0x5eed)
}

pub fn any_model(r: &mut impl Rng) -> HumanModel {
    let joints = random_joints(r);
    random_model(r, joints)
}
