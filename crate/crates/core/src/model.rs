//! Sagittal rigid-body human model.
//!
//! The chain is rooted at the ankle. A base body (the feet) is rigidly
//! attached to the floating base frame, and seven links follow it through
//! the reported joints: shank, thigh, pelvis, trunk, upper arm, forearm and
//! hand. Angles are measured in the sagittal plane from the world vertical
//! (+z) toward +x, so a link with absolute angle φ has the longitudinal axis
//! `u = (sin φ, cos φ)` and the normal `n = (cos φ, −sin φ)`. Local points
//! on a segment are written `(along, perp)` and map to `origin + along·u + perp·n`.
//!
//! Link `i` has absolute angle `φ_{i−1} + sign_i·q_i + offset_i`, with φ of the
//! base body equal to the base pitch. With every offset at zero the all-zero
//! configuration stacks the links vertically above the ankle.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use libm::{cos, sin};
use nalgebra::{DMatrix, DVector};

use crate::{Error, Joint, Result, Vec2, GRAVITY, N_JOINTS};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Number of scalar SESC coefficients: one pair per link plus the base-body pair.
pub const SESC_LEN: usize = 2 * N_JOINTS + 2;

/// Below this fraction of `g`, vertical support is treated as free fall.
const FREE_FALL_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Segment {
    pub name: String,
    /// Proximal-to-distal length [m].
    pub length: f64,
    /// [kg]
    pub mass: f64,
    /// Segment CoM in local `(along, perp)` coordinates [m].
    pub com_offset: [f64; 2],
    /// Sagittal moment of inertia about the segment CoM [kg·m²].
    pub inertia: f64,
}

impl Segment {
    pub fn new(name: &str, length: f64, mass: f64, com_offset: [f64; 2], inertia: f64) -> Self {
        Self {
            name: name.to_string(),
            length,
            mass,
            com_offset,
            inertia,
        }
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            self.length,
            self.mass,
            self.com_offset[0],
            self.com_offset[1],
            self.inertia,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "segment '{}' has non-finite fields",
                self.name
            )));
        }
        if self.length <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "segment '{}' has non-positive length",
                self.name
            )));
        }
        if self.mass < 0.0 || self.inertia < 0.0 {
            return Err(Error::InvalidModel(format!(
                "segment '{}' has negative mass or inertia",
                self.name
            )));
        }
        let r = libm::hypot(self.com_offset[0], self.com_offset[1]);
        if r > self.length * (1.0 + 1e-12) {
            return Err(Error::InvalidModel(format!(
                "segment '{}' has its CoM farther than its length from the origin",
                self.name
            )));
        }
        Ok(())
    }
}

/// Revolute joint definition: which joint, the sign that makes flexion
/// positive, and a constant angle offset added to the joint angle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct JointDef {
    pub joint: Joint,
    pub sign: f64,
    pub offset: f64,
}

impl JointDef {
    pub const fn new(joint: Joint, sign: f64, offset: f64) -> Self {
        Self {
            joint,
            sign,
            offset,
        }
    }

    /// Zero offsets; knee flexion folds the thigh backwards, every other joint
    /// flexes toward +x.
    pub fn stacked() -> [JointDef; N_JOINTS] {
        let signs = [1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        core::array::from_fn(|i| JointDef::new(Joint::ALL[i], signs[i], 0.0))
    }

    /// Anatomical neutral at `q = 0`: upright with the arms hanging. The
    /// shoulder is offset by π and the arm joints flex forward from the
    /// hanging posture.
    pub fn anatomical() -> [JointDef; N_JOINTS] {
        let signs = [1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
        core::array::from_fn(|i| {
            let offset = if Joint::ALL[i] == Joint::Shoulder {
                core::f64::consts::PI
            } else {
                0.0
            };
            JointDef::new(Joint::ALL[i], signs[i], offset)
        })
    }
}

fn validate_joints(joints: &[JointDef; N_JOINTS]) -> Result<()> {
    for (i, def) in joints.iter().enumerate() {
        if def.joint != Joint::ALL[i] {
            return Err(Error::InvalidModel(format!(
                "joint {} must be the {}, found the {}",
                i,
                Joint::ALL[i],
                def.joint
            )));
        }
        if def.sign != 1.0 && def.sign != -1.0 {
            return Err(Error::InvalidModel(format!(
                "joint sign at the {} must be ±1",
                def.joint
            )));
        }
        if !def.offset.is_finite() {
            return Err(Error::NonFinite("joint offset"));
        }
    }
    Ok(())
}

/// Floating-base state in the sagittal plane: position of the ankle frame,
/// its pitch, and their first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BaseState {
    pub position: [f64; 2],
    pub pitch: f64,
    pub velocity: [f64; 2],
    pub pitch_rate: f64,
    pub acceleration: [f64; 2],
    pub pitch_acceleration: f64,
}

impl BaseState {
    pub fn at(x: f64, z: f64) -> Self {
        Self {
            position: [x, z],
            ..Self::default()
        }
    }

    fn all(&self) -> [f64; 9] {
        [
            self.position[0],
            self.position[1],
            self.pitch,
            self.velocity[0],
            self.velocity[1],
            self.pitch_rate,
            self.acceleration[0],
            self.acceleration[1],
            self.pitch_acceleration,
        ]
    }
}

/// Joint angles with their rates and the floating-base state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct JointConfiguration {
    pub q: [f64; N_JOINTS],
    pub qd: [f64; N_JOINTS],
    pub qdd: [f64; N_JOINTS],
    pub base: BaseState,
}

impl JointConfiguration {
    pub fn static_pose(q: [f64; N_JOINTS]) -> Self {
        Self {
            q,
            ..Self::default()
        }
    }

    pub fn new(q: [f64; N_JOINTS], qd: [f64; N_JOINTS], qdd: [f64; N_JOINTS]) -> Self {
        Self {
            q,
            qd,
            qdd,
            base: BaseState::default(),
        }
    }

    pub fn with_base(mut self, base: BaseState) -> Self {
        self.base = base;
        self
    }

    /// Builds a configuration from slices, checking their length.
    pub fn from_slices(q: &[f64], qd: &[f64], qdd: &[f64]) -> Result<Self> {
        fn arr(what: &'static str, s: &[f64]) -> Result<[f64; N_JOINTS]> {
            s.try_into().map_err(|_| Error::DimensionMismatch {
                what,
                expected: N_JOINTS,
                got: s.len(),
            })
        }
        let cfg = Self::new(arr("q", q)?, arr("qd", qd)?, arr("qdd", qdd)?);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let joints = self.q.iter().chain(&self.qd).chain(&self.qdd);
        if joints.chain(self.base.all().iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("joint configuration"));
        }
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        self.qd.iter().chain(&self.qdd).all(|v| *v == 0.0)
            && self.base.velocity == [0.0; 2]
            && self.base.acceleration == [0.0; 2]
            && self.base.pitch_rate == 0.0
            && self.base.pitch_acceleration == 0.0
    }
}

/// World-frame state of one rigid body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub origin: Vec2,
    pub angle: f64,
    pub rate: f64,
    pub accel: f64,
    pub origin_vel: Vec2,
    pub origin_acc: Vec2,
}

impl BodyState {
    /// Longitudinal unit vector.
    pub fn axis(&self) -> Vec2 {
        Vec2::new(sin(self.angle), cos(self.angle))
    }

    pub fn normal(&self) -> Vec2 {
        Vec2::new(cos(self.angle), -sin(self.angle))
    }

    pub fn point(&self, local: [f64; 2]) -> Vec2 {
        self.origin + self.axis() * local[0] + self.normal() * local[1]
    }

    pub fn point_velocity(&self, local: [f64; 2]) -> Vec2 {
        let lever = self.normal() * local[0] - self.axis() * local[1];
        self.origin_vel + lever * self.rate
    }

    pub fn point_acceleration(&self, local: [f64; 2]) -> Vec2 {
        let lever = self.normal() * local[0] - self.axis() * local[1];
        let radial = self.axis() * local[0] + self.normal() * local[1];
        self.origin_acc + lever * self.accel - radial * (self.rate * self.rate)
    }
}

/// Result of forward kinematics: the base body and the seven links.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub base: BodyState,
    pub links: [BodyState; N_JOINTS],
    lengths: [f64; N_JOINTS],
}

impl Kinematics {
    /// Position of a reported joint (the origin of its distal link).
    pub fn joint_position(&self, joint: Joint) -> Vec2 {
        self.links[joint.index()].origin
    }

    /// Distal end of link `i`.
    pub fn distal(&self, i: usize) -> Vec2 {
        self.links[i].point([self.lengths[i], 0.0])
    }

    /// Distal end of the hand link.
    pub fn hand_tip(&self) -> Vec2 {
        self.distal(N_JOINTS - 1)
    }
}

/// Whole-body CoM with its first and second time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct HumanModel {
    base_body: Segment,
    links: Vec<Segment>,
    joints: [JointDef; N_JOINTS],
    mass: f64,
}

impl HumanModel {
    pub fn new(
        base_body: Segment,
        links: Vec<Segment>,
        joints: [JointDef; N_JOINTS],
    ) -> Result<Self> {
        if links.len() != N_JOINTS {
            return Err(Error::DimensionMismatch {
                what: "links",
                expected: N_JOINTS,
                got: links.len(),
            });
        }
        base_body.validate()?;
        for s in &links {
            s.validate()?;
        }
        validate_joints(&joints)?;
        let mass = base_body.mass + links.iter().map(|s| s.mass).sum::<f64>();
        Ok(Self {
            base_body,
            links,
            joints,
            mass,
        })
    }

    /// Scales an anthropometric table to a subject. Rows are the base body
    /// followed by the seven links.
    pub fn from_anthropometrics(
        mass: f64,
        height: f64,
        table: &[AnthropometricRow; N_JOINTS + 1],
        joints: [JointDef; N_JOINTS],
    ) -> Result<Self> {
        if !(mass > 0.0) || !(height > 0.0) {
            return Err(Error::NonPositive {
                what: "subject mass and height",
            });
        }
        let total: f64 = table.iter().map(|r| r.mass_fraction).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "mass fractions sum to {total}, not 1"
            )));
        }
        let build = |r: &AnthropometricRow| {
            let length = r.length_fraction * height;
            let m = r.mass_fraction * mass;
            let rg = r.gyration_fraction * length;
            Segment::new(
                &r.name,
                length,
                m,
                [r.com_along_fraction * length, r.com_perp_fraction * length],
                m * rg * rg,
            )
        };
        let base = build(&table[0]);
        let links = table[1..].iter().map(build).collect();
        Self::new(base, links, joints)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Checks the segment masses against an externally measured subject mass.
    pub fn check_mass(&self, subject_mass: f64) -> Result<()> {
        if (self.mass - subject_mass).abs() > 1e-9 * subject_mass.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidModel(format!(
                "segment masses sum to {} kg, subject mass is {} kg",
                self.mass, subject_mass
            )));
        }
        Ok(())
    }

    pub fn base_body(&self) -> &Segment {
        &self.base_body
    }

    pub fn links(&self) -> &[Segment] {
        &self.links
    }

    pub fn joints(&self) -> &[JointDef; N_JOINTS] {
        &self.joints
    }

    pub fn link(&self, joint: Joint) -> &Segment {
        &self.links[joint.index()]
    }
}

/// Row of an anthropometric scaling table; lengths are fractions of body
/// height, CoM coordinates and radius of gyration fractions of segment length.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AnthropometricRow {
    pub name: String,
    pub mass_fraction: f64,
    pub length_fraction: f64,
    pub com_along_fraction: f64,
    pub com_perp_fraction: f64,
    pub gyration_fraction: f64,
}

struct Angles {
    angle: [f64; N_JOINTS + 1],
    rate: [f64; N_JOINTS + 1],
    accel: [f64; N_JOINTS + 1],
}

/// Absolute angles of the base body (index 0) and the links.
fn absolute_angles(joints: &[JointDef; N_JOINTS], cfg: &JointConfiguration) -> Angles {
    let mut a = Angles {
        angle: [0.0; N_JOINTS + 1],
        rate: [0.0; N_JOINTS + 1],
        accel: [0.0; N_JOINTS + 1],
    };
    a.angle[0] = cfg.base.pitch;
    a.rate[0] = cfg.base.pitch_rate;
    a.accel[0] = cfg.base.pitch_acceleration;
    for (i, def) in joints.iter().enumerate() {
        a.angle[i + 1] = a.angle[i] + def.sign * cfg.q[i] + def.offset;
        a.rate[i + 1] = a.rate[i] + def.sign * cfg.qd[i];
        a.accel[i + 1] = a.accel[i] + def.sign * cfg.qdd[i];
    }
    a
}

pub fn forward_kinematics(model: &HumanModel, cfg: &JointConfiguration) -> Result<Kinematics> {
    cfg.validate()?;
    let ang = absolute_angles(&model.joints, cfg);
    let b = &cfg.base;
    let base = BodyState {
        origin: Vec2::from(b.position),
        angle: ang.angle[0],
        rate: ang.rate[0],
        accel: ang.accel[0],
        origin_vel: Vec2::from(b.velocity),
        origin_acc: Vec2::from(b.acceleration),
    };
    let mut links = [base; N_JOINTS];
    let mut origin = base.origin;
    let mut vel = base.origin_vel;
    let mut acc = base.origin_acc;
    let mut lengths = [0.0; N_JOINTS];
    for i in 0..N_JOINTS {
        let body = BodyState {
            origin,
            angle: ang.angle[i + 1],
            rate: ang.rate[i + 1],
            accel: ang.accel[i + 1],
            origin_vel: vel,
            origin_acc: acc,
        };
        let len = model.links[i].length;
        lengths[i] = len;
        origin = body.point([len, 0.0]);
        vel = body.point_velocity([len, 0.0]);
        acc = body.point_acceleration([len, 0.0]);
        links[i] = body;
    }
    Ok(Kinematics {
        base,
        links,
        lengths,
    })
}

/// Source of whole-body CoM estimates: the full model or fitted SESC parameters.
pub trait ComSource {
    fn total_mass(&self) -> f64;

    fn com_state(&self, cfg: &JointConfiguration) -> Result<ComState>;

    fn com(&self, cfg: &JointConfiguration) -> Result<Vec2> {
        Ok(self.com_state(cfg)?.position)
    }

    /// CoP expected for this configuration without any external load.
    /// The default treats the body as a point mass at the CoM.
    fn load_free_cop(&self, cfg: &JointConfiguration) -> Result<f64> {
        let c = self.com_state(cfg)?;
        let support = GRAVITY + c.acceleration.y;
        check_support(support)?;
        Ok(c.position.x - c.position.y * c.acceleration.x / support)
    }
}

fn check_support(support: f64) -> Result<()> {
    if !(support > FREE_FALL_FRACTION * GRAVITY) {
        return Err(Error::FreeFall { support });
    }
    Ok(())
}

impl HumanModel {
    fn segment_iter<'a>(
        &'a self,
        kin: &'a Kinematics,
    ) -> impl Iterator<Item = (&'a Segment, &'a BodyState)> + 'a {
        core::iter::once((&self.base_body, &kin.base))
            .chain(self.links.iter().zip(kin.links.iter()))
    }

    pub fn com_from_kinematics(&self, kin: &Kinematics) -> Result<ComState> {
        if !(self.mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        let mut p = Vec2::zeros();
        let mut v = Vec2::zeros();
        let mut a = Vec2::zeros();
        for (seg, body) in self.segment_iter(kin) {
            p += body.point(seg.com_offset) * seg.mass;
            v += body.point_velocity(seg.com_offset) * seg.mass;
            a += body.point_acceleration(seg.com_offset) * seg.mass;
        }
        Ok(ComState {
            position: p / self.mass,
            velocity: v / self.mass,
            acceleration: a / self.mass,
        })
    }

    /// Rate of change of the sagittal angular momentum about the CoM
    /// (y component, positive when rotating from +z toward +x).
    pub fn angular_momentum_rate(&self, kin: &Kinematics, com: &ComState) -> f64 {
        self.segment_iter(kin)
            .map(|(seg, body)| {
                let r = body.point(seg.com_offset) - com.position;
                let a = body.point_acceleration(seg.com_offset) - com.acceleration;
                seg.inertia * body.accel + seg.mass * cross_y(r, a)
            })
            .sum()
    }
}

impl ComSource for HumanModel {
    fn total_mass(&self) -> f64 {
        self.mass
    }

    fn com_state(&self, cfg: &JointConfiguration) -> Result<ComState> {
        let kin = forward_kinematics(self, cfg)?;
        self.com_from_kinematics(&kin)
    }

    fn load_free_cop(&self, cfg: &JointConfiguration) -> Result<f64> {
        estimate_cop_dynamic(self, cfg)
    }
}

/// y component of `r × f` for sagittal vectors stored as `(x, z)`.
pub fn cross_y(r: Vec2, f: Vec2) -> f64 {
    r.y * f.x - r.x * f.y
}

/// Mass-weighted CoM of all segments in the world frame.
pub fn whole_body_com(model: &HumanModel, cfg: &JointConfiguration) -> Result<Vec2> {
    model.com(cfg)
}

/// Statically equivalent serial chain parameters: the whole-body CoM is
/// `base + Σ_i (α_i u_i + β_i n_i) + α_b u_b + β_b n_b`, linear in the
/// coefficients. Layout: `[α_1, β_1, …, α_7, β_7, α_b, β_b]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SescParameters {
    pub joints: [JointDef; N_JOINTS],
    pub coeffs: Vec<f64>,
}

impl SescParameters {
    pub fn new(joints: [JointDef; N_JOINTS], coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != SESC_LEN {
            return Err(Error::DimensionMismatch {
                what: "SESC parameters",
                expected: SESC_LEN,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("SESC parameters"));
        }
        validate_joints(&joints)?;
        Ok(Self { joints, coeffs })
    }

    /// Closed-form conversion from body segment inertial parameters.
    pub fn from_model(model: &HumanModel) -> Result<Self> {
        let m = model.mass;
        if !(m > 0.0) {
            return Err(Error::ZeroMass);
        }
        let mut coeffs = alloc::vec![0.0; SESC_LEN];
        let mut distal_mass = 0.0;
        for i in (0..N_JOINTS).rev() {
            let seg = &model.links[i];
            coeffs[2 * i] = (seg.mass * seg.com_offset[0] + seg.length * distal_mass) / m;
            coeffs[2 * i + 1] = seg.mass * seg.com_offset[1] / m;
            distal_mass += seg.mass;
        }
        let b = &model.base_body;
        coeffs[2 * N_JOINTS] = b.mass * b.com_offset[0] / m;
        coeffs[2 * N_JOINTS + 1] = b.mass * b.com_offset[1] / m;
        Self::new(model.joints, coeffs)
    }

    pub fn base_offset(&self) -> [f64; 2] {
        [self.coeffs[2 * N_JOINTS], self.coeffs[2 * N_JOINTS + 1]]
    }
}

/// The `2 × SESC_LEN` regressor `Φ(cfg)` and its first two time derivatives.
pub struct SescRegressor {
    pub phi: DMatrix<f64>,
    pub phi_dot: DMatrix<f64>,
    pub phi_ddot: DMatrix<f64>,
}

pub fn sesc_regressor(joints: &[JointDef; N_JOINTS], cfg: &JointConfiguration) -> SescRegressor {
    let ang = absolute_angles(joints, cfg);
    let mut phi = DMatrix::zeros(2, SESC_LEN);
    let mut phi_dot = DMatrix::zeros(2, SESC_LEN);
    let mut phi_ddot = DMatrix::zeros(2, SESC_LEN);
    // body k: 0 is the base body, 1..=7 the links
    for k in 0..=N_JOINTS {
        let col = if k == 0 { 2 * N_JOINTS } else { 2 * (k - 1) };
        let (s, c) = (sin(ang.angle[k]), cos(ang.angle[k]));
        let (w, al) = (ang.rate[k], ang.accel[k]);
        let u = Vec2::new(s, c);
        let n = Vec2::new(c, -s);
        let du = n * w;
        let dn = -u * w;
        let ddu = n * al - u * (w * w);
        let ddn = -u * al - n * (w * w);
        for r in 0..2 {
            phi[(r, col)] = u[r];
            phi[(r, col + 1)] = n[r];
            phi_dot[(r, col)] = du[r];
            phi_dot[(r, col + 1)] = dn[r];
            phi_ddot[(r, col)] = ddu[r];
            phi_ddot[(r, col + 1)] = ddn[r];
        }
    }
    SescRegressor {
        phi,
        phi_dot,
        phi_ddot,
    }
}

/// CoM predicted by SESC parameters.
pub fn sesc_com(params: &SescParameters, cfg: &JointConfiguration) -> Result<Vec2> {
    Ok(sesc_com_state(params, cfg)?.position)
}

pub fn sesc_com_state(params: &SescParameters, cfg: &JointConfiguration) -> Result<ComState> {
    if params.coeffs.len() != SESC_LEN {
        return Err(Error::DimensionMismatch {
            what: "SESC parameters",
            expected: SESC_LEN,
            got: params.coeffs.len(),
        });
    }
    cfg.validate()?;
    let reg = sesc_regressor(&params.joints, cfg);
    let p = DVector::from_column_slice(&params.coeffs);
    let pos = &reg.phi * &p;
    let vel = &reg.phi_dot * &p;
    let acc = &reg.phi_ddot * &p;
    let b = &cfg.base;
    Ok(ComState {
        position: Vec2::from(b.position) + Vec2::new(pos[0], pos[1]),
        velocity: Vec2::from(b.velocity) + Vec2::new(vel[0], vel[1]),
        acceleration: Vec2::from(b.acceleration) + Vec2::new(acc[0], acc[1]),
    })
}

/// SESC parameters together with the subject mass they were fitted for.
#[derive(Debug, Clone, PartialEq)]
pub struct Sesc {
    pub params: SescParameters,
    pub mass: f64,
}

impl ComSource for Sesc {
    fn total_mass(&self) -> f64 {
        self.mass
    }

    fn com_state(&self, cfg: &JointConfiguration) -> Result<ComState> {
        sesc_com_state(&self.params, cfg)
    }
}

/// Static CoP: horizontal projection of the CoM onto the ground line (z = 0).
pub fn estimate_cop_static<S: ComSource + ?Sized>(
    source: &S,
    cfg: &JointConfiguration,
) -> Result<f64> {
    Ok(source.com(cfg)?.x)
}

/// Dynamic CoP from the planar moment balance about the CoM:
/// `x_p = x_c − (Ḣ_y + M z_c ẍ_c) / (M (g + z̈_c))`.
pub fn estimate_cop_dynamic(model: &HumanModel, cfg: &JointConfiguration) -> Result<f64> {
    let kin = forward_kinematics(model, cfg)?;
    let com = model.com_from_kinematics(&kin)?;
    let h_dot = model.angular_momentum_rate(&kin, &com);
    let support = GRAVITY + com.acceleration.y;
    check_support(support)?;
    let m = model.mass;
    Ok(com.position.x - (h_dot + m * com.position.y * com.acceleration.x) / (m * support))
}
