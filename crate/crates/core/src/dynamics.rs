//! Planar inverse dynamics and the load-related joint quantities.
//!
//! Joint loads are propagated from the hand down to the ankle. For every
//! joint the recursion yields the force and the y-moment that the proximal
//! segment exerts on the distal one; reported joint torques are those
//! moments multiplied by the joint's flexion sign.

use crate::model::{
    cross_y, forward_kinematics, ComSource, HumanModel, JointConfiguration, Kinematics,
};
use crate::{Error, Result, Vec2, GRAVITY, N_JOINTS};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Wrench exerted by the environment on the hand segment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ExternalWrench {
    /// Application point in hand-local `(along, perp)` coordinates [m].
    pub point: [f64; 2],
    /// Sagittal force `(x, z)` [N].
    pub force: [f64; 2],
    /// y-moment [N·m].
    pub torque: f64,
}

impl ExternalWrench {
    pub const fn none() -> Self {
        Self {
            point: [0.0, 0.0],
            force: [0.0, 0.0],
            torque: 0.0,
        }
    }

    pub const fn new(point: [f64; 2], force: [f64; 2], torque: f64) -> Self {
        Self {
            point,
            force,
            torque,
        }
    }

    /// A carried weight: `load` newtons pulling the hand straight down.
    pub const fn vertical_load(point: [f64; 2], load: f64) -> Self {
        Self::new(point, [0.0, -load], 0.0)
    }

    /// Keeps only the vertical force component.
    pub fn vertical_only(&self) -> Self {
        Self::new(self.point, [0.0, self.force[1]], 0.0)
    }

    pub fn force_vec(&self) -> Vec2 {
        Vec2::from(self.force)
    }

    pub fn is_zero(&self) -> bool {
        self.force == [0.0, 0.0] && self.torque == 0.0
    }

    fn validate(&self) -> Result<()> {
        let v = [
            self.point[0],
            self.point[1],
            self.force[0],
            self.force[1],
            self.torque,
        ];
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("external wrench"));
        }
        Ok(())
    }
}

/// Measured ground reaction in the sagittal plane. The force acts at
/// `(cop_x, 0)`, where the sagittal ground moment vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GroundReaction {
    pub force: [f64; 2],
    pub cop_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverloadingTorques(pub [f64; N_JOINTS]);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressiveForces(pub [f64; N_JOINTS]);

/// Ground wrench implied by the motion, compared with the measured one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundBalance {
    /// Force the ground must apply to the feet [N].
    pub predicted_force: Vec2,
    /// y-moment the ground must apply, about the ankle [N·m].
    pub predicted_moment: f64,
    /// Measured minus predicted force, when a measurement was supplied.
    pub force_residual: Option<Vec2>,
    /// Measured minus predicted moment about the ankle.
    pub moment_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointLoads {
    /// Net joint torques, positive in the flexion direction [N·m].
    pub torques: [f64; N_JOINTS],
    /// Force exerted by the proximal segment on the distal one [N].
    pub forces: [Vec2; N_JOINTS],
    /// y-moment exerted by the proximal segment on the distal one [N·m].
    pub moments: [f64; N_JOINTS],
    pub ground: GroundBalance,
    pub kinematics: Kinematics,
}

/// Recursive Newton–Euler over the sagittal chain.
pub fn inverse_dynamics(
    model: &HumanModel,
    cfg: &JointConfiguration,
    external: &ExternalWrench,
    grf: Option<&GroundReaction>,
) -> Result<JointLoads> {
    inverse_dynamics_with_gravity(model, cfg, external, grf, GRAVITY)
}

pub fn inverse_dynamics_with_gravity(
    model: &HumanModel,
    cfg: &JointConfiguration,
    external: &ExternalWrench,
    grf: Option<&GroundReaction>,
    gravity: f64,
) -> Result<JointLoads> {
    external.validate()?;
    let kin = forward_kinematics(model, cfg)?;
    let up = Vec2::new(0.0, gravity);
    let links = model.links();
    let hand = &kin.links[N_JOINTS - 1];
    let ext_point = hand.point(external.point);
    let ext_force = external.force_vec();

    let mut forces = [Vec2::zeros(); N_JOINTS];
    let mut moments = [0.0; N_JOINTS];
    let mut f_next = Vec2::zeros();
    let mut n_next = 0.0;
    for i in (0..N_JOINTS).rev() {
        let body = &kin.links[i];
        let seg = &links[i];
        let r_c = body.point(seg.com_offset) - body.origin;
        let inertial = (body.point_acceleration(seg.com_offset) + up) * seg.mass;
        let r_next = kin.distal(i) - body.origin;
        let mut f = inertial + f_next;
        let mut n =
            seg.inertia * body.accel + cross_y(r_c, inertial) + n_next + cross_y(r_next, f_next);
        if i == N_JOINTS - 1 {
            f -= ext_force;
            n -= cross_y(ext_point - body.origin, ext_force) + external.torque;
        }
        forces[i] = f;
        moments[i] = n;
        f_next = f;
        n_next = n;
    }

    let base = &kin.base;
    let foot = model.base_body();
    let r_f = base.point(foot.com_offset) - base.origin;
    let foot_inertial = (base.point_acceleration(foot.com_offset) + up) * foot.mass;
    let predicted_force = foot_inertial + forces[0];
    let predicted_moment = foot.inertia * base.accel + cross_y(r_f, foot_inertial) + moments[0];
    let (force_residual, moment_residual) = match grf {
        Some(g) => {
            let f = Vec2::from(g.force);
            let r = Vec2::new(g.cop_x, 0.0) - base.origin;
            (
                Some(f - predicted_force),
                Some(cross_y(r, f) - predicted_moment),
            )
        }
        None => (None, None),
    };

    let joints = model.joints();
    let torques = core::array::from_fn(|i| joints[i].sign * moments[i]);
    Ok(JointLoads {
        torques,
        forces,
        moments,
        ground: GroundBalance {
            predicted_force,
            predicted_moment,
            force_residual,
            moment_residual,
        },
        kinematics: kin,
    })
}

/// Joint-torque increment caused by the external wrench alone, `Jᵀ` applied
/// to the load the human sustains (the negated contact wrench).
pub fn overloading_torque(
    model: &HumanModel,
    cfg: &JointConfiguration,
    external: &ExternalWrench,
) -> Result<OverloadingTorques> {
    external.validate()?;
    let kin = forward_kinematics(model, cfg)?;
    let point = kin.links[N_JOINTS - 1].point(external.point);
    let force = external.force_vec();
    let joints = model.joints();
    Ok(OverloadingTorques(core::array::from_fn(|j| {
        let lever = point - kin.links[j].origin;
        -joints[j].sign * (cross_y(lever, force) + external.torque)
    })))
}

/// Same quantity as [`overloading_torque`], as the difference of two
/// inverse-dynamics solutions with and without the wrench.
pub fn overloading_torque_by_difference(
    model: &HumanModel,
    cfg: &JointConfiguration,
    external: &ExternalWrench,
) -> Result<OverloadingTorques> {
    let with = inverse_dynamics(model, cfg, external, None)?;
    let without = inverse_dynamics(model, cfg, &ExternalWrench::none(), None)?;
    Ok(OverloadingTorques(core::array::from_fn(|j| {
        with.torques[j] - without.torques[j]
    })))
}

/// Inward axial component of the force transmitted through each joint,
/// measured along the distal segment's axis and clipped at zero.
pub fn compressive_forces(
    model: &HumanModel,
    cfg: &JointConfiguration,
    external: &ExternalWrench,
    grf: Option<&GroundReaction>,
) -> Result<CompressiveForces> {
    let loads = inverse_dynamics(model, cfg, external, grf)?;
    Ok(compressive_from_loads(&loads))
}

pub fn compressive_from_loads(loads: &JointLoads) -> CompressiveForces {
    CompressiveForces(core::array::from_fn(|j| {
        let axial = loads.forces[j].dot(&loads.kinematics.links[j].axis());
        axial.max(0.0)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadEstimate {
    /// Vertical force carried at the hands, positive when pulling down [N].
    pub vertical_force: f64,
    /// Measured CoP minus the load-free CoP estimate [m].
    pub cop_residual: f64,
    /// Horizontal load position implied by the CoP shift, when a load is present.
    pub load_x: Option<f64>,
}

/// Below this vertical force no load position is reported [N].
const MIN_LOAD_FOR_POSITION: f64 = 1e-3;

/// External vertical load from the force-plate excess over body weight and
/// the CoP shift against the load-free estimate.
pub fn estimate_external_vertical_force<S: ComSource + ?Sized>(
    source: &S,
    cfg: &JointConfiguration,
    measured_cop_x: f64,
    measured_grf: [f64; 2],
) -> Result<LoadEstimate> {
    if !measured_cop_x.is_finite() || measured_grf.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ground reaction"));
    }
    let com = source.com_state(cfg)?;
    let cop_free = source.load_free_cop(cfg)?;
    let body_support = source.total_mass() * (GRAVITY + com.acceleration.y);
    let vertical_force = measured_grf[1] - body_support;
    let cop_residual = measured_cop_x - cop_free;
    let load_x = (vertical_force > MIN_LOAD_FOR_POSITION)
        .then(|| cop_free + cop_residual * measured_grf[1] / vertical_force);
    Ok(LoadEstimate {
        vertical_force,
        cop_residual,
        load_x,
    })
}
