//! Quadruped model: inertial parameters, leg geometry, analytic kinematics.
//!
//! Each leg is a 3-DoF serial chain — hip abduction/adduction (HAA, about x),
//! hip flexion/extension (HFE, about y), knee flexion/extension (KFE, about
//! y) — hanging from a fixed hip offset on the base. Knees follow the
//! x-configuration: front knees bend backward, hind knees forward.

mod io;

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

use crate::math;

pub const N_LEGS: usize = 4;
pub const N_JOINTS: usize = 12;

/// Leg order used everywhere: left-front, right-front, left-hind, right-hind.
pub const LEG_NAMES: [&str; N_LEGS] = ["lf", "rf", "lh", "rh"];

#[derive(Debug, Error, PartialEq)]
pub enum RobotError {
    #[error("mass {0} must be positive")]
    BadMass(f64),
    #[error("body inertia must be symmetric positive definite")]
    BadInertia,
    #[error("leg link lengths must be positive, got upper {upper}, lower {lower}")]
    BadLinkLengths { upper: f64, lower: f64 },
    #[error("friction coefficient {0} must lie in (0, 1.5]")]
    BadFriction(f64),
    #[error("joint limit {index} has lower {lo} > upper {hi}")]
    BadJointLimit { index: usize, lo: f64, hi: f64 },
    #[error("leg {leg} target at distance {dist:.3} m outside reach [{min:.3}, {max:.3}]")]
    UnreachableTarget { leg: usize, dist: f64, min: f64, max: f64 },
    #[error("leg index {0} out of range (4 legs)")]
    BadLegIndex(usize),
}

/// Base pose: world position of the CoM and base orientation.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, rotation: Rotation3<f64>) -> Self {
        Pose { position, rotation }
    }

    /// Pose from position and ZYX Euler angles (roll, pitch, yaw).
    pub fn from_euler(position: Vector3<f64>, euler: Vector3<f64>) -> Self {
        Pose {
            position,
            rotation: Rotation3::from_matrix_unchecked(math::rotation(&euler)),
        }
    }

    pub fn identity() -> Self {
        Pose { position: Vector3::zeros(), rotation: Rotation3::identity() }
    }

    pub fn to_world(&self, p_base: Vector3<f64>) -> Vector3<f64> {
        self.position + self.rotation * p_base
    }

    pub fn to_base(&self, p_world: Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p_world - self.position)
    }
}

/// Joint angles and velocities for all four legs, ordered
/// (HAA, HFE, KFE) x (LF, RF, LH, RH).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub q: [f64; N_JOINTS],
    pub qdot: [f64; N_JOINTS],
}

/// Kinematic and inertial description of the quadruped.
#[derive(Debug, Clone)]
pub struct RobotModel {
    /// Total mass lumped at the CoM (kg).
    pub mass: f64,
    /// Body inertia about the CoM, base frame (kg m^2).
    pub body_inertia: Matrix3<f64>,
    /// Hip positions in the base frame (m).
    pub hip_offsets: [Vector3<f64>; N_LEGS],
    /// Link lengths (m).
    pub upper_leg_len: f64,
    pub lower_leg_len: f64,
    /// Per-leg end-effector bounding boxes, base frame (m).
    pub kinematic_box_centers: [Vector3<f64>; N_LEGS],
    pub kinematic_box_half_extents: [Vector3<f64>; N_LEGS],
    /// Contact friction coefficient.
    pub friction_mu: f64,
    /// Per-joint (lower, upper) angle limits (rad), joint order as in
    /// [`JointState`].
    pub joint_limits: [(f64, f64); N_JOINTS],
    /// Vertical hip-to-foot distance in the nominal stance (m).
    pub nominal_stance_depth: f64,
}

impl Default for RobotModel {
    /// A 30 kg quadruped with ANYmal-like proportions. The kinematic boxes
    /// are sized to stay strictly inside the reachable annulus of the
    /// 0.25 m + 0.33 m leg so every planned foot position admits an IK
    /// solution.
    fn default() -> Self {
        let hip_offsets = [
            Vector3::new(0.277, 0.234, 0.0),
            Vector3::new(0.277, -0.234, 0.0),
            Vector3::new(-0.277, 0.234, 0.0),
            Vector3::new(-0.277, -0.234, 0.0),
        ];
        let depth = 0.44;
        let box_half = Vector3::new(0.14, 0.10, 0.10);
        let per_joint = [(-0.8, 0.8), (-1.6, 1.6), (-2.4, 2.4)];
        let mut joint_limits = [(0.0, 0.0); N_JOINTS];
        for leg in 0..N_LEGS {
            for j in 0..3 {
                joint_limits[leg * 3 + j] = per_joint[j];
            }
        }
        RobotModel {
            mass: 30.0,
            body_inertia: Matrix3::from_diagonal(&Vector3::new(0.5, 1.0, 1.3)),
            hip_offsets,
            upper_leg_len: 0.25,
            lower_leg_len: 0.33,
            kinematic_box_centers: hip_offsets.map(|h| h + Vector3::new(0.0, 0.0, -depth)),
            kinematic_box_half_extents: [box_half; N_LEGS],
            friction_mu: 0.5,
            joint_limits,
            nominal_stance_depth: depth,
        }
    }
}

impl RobotModel {
    pub fn validate(&self) -> Result<(), RobotError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(RobotError::BadMass(self.mass));
        }
        let sym = (self.body_inertia - self.body_inertia.transpose()).norm() < 1e-9;
        if !sym || self.body_inertia.clone().cholesky().is_none() {
            return Err(RobotError::BadInertia);
        }
        if !(self.upper_leg_len > 0.0 && self.lower_leg_len > 0.0) {
            return Err(RobotError::BadLinkLengths {
                upper: self.upper_leg_len,
                lower: self.lower_leg_len,
            });
        }
        if !(self.friction_mu > 0.0 && self.friction_mu <= 1.5) {
            return Err(RobotError::BadFriction(self.friction_mu));
        }
        for (index, &(lo, hi)) in self.joint_limits.iter().enumerate() {
            if lo > hi {
                return Err(RobotError::BadJointLimit { index, lo, hi });
            }
        }
        Ok(())
    }

    /// Body inertia expressed in world axes for base rotation `r`.
    pub fn world_inertia(&self, r: &Rotation3<f64>) -> Matrix3<f64> {
        r.matrix() * self.body_inertia * r.matrix().transpose()
    }

    pub fn is_front_leg(leg: usize) -> bool {
        leg < 2
    }

    /// KFE sign per the x-configuration: front knees bend backward
    /// (negative KFE), hind knees forward (positive).
    pub fn knee_sign(leg: usize) -> f64 {
        if Self::is_front_leg(leg) {
            -1.0
        } else {
            1.0
        }
    }

    pub fn max_leg_reach(&self) -> f64 {
        self.upper_leg_len + self.lower_leg_len
    }

    pub fn min_leg_reach(&self) -> f64 {
        (self.upper_leg_len - self.lower_leg_len).abs()
    }

    /// Foot position in the base frame for one leg.
    pub fn leg_forward_kinematics(&self, leg: usize, q: &[f64; 3]) -> Vector3<f64> {
        let [alpha, beta, gamma] = *q;
        let u = Vector3::new(0.0, 0.0, -self.upper_leg_len);
        let l = Vector3::new(0.0, 0.0, -self.lower_leg_len);
        self.hip_offsets[leg] + math::rot_x(alpha) * (math::rot_y(beta) * u + math::rot_y(beta + gamma) * l)
    }

    /// World-frame foot positions for all four legs.
    pub fn forward_kinematics(&self, base: &Pose, q: &[f64; N_JOINTS]) -> [Vector3<f64>; N_LEGS] {
        std::array::from_fn(|leg| {
            let angles = [q[leg * 3], q[leg * 3 + 1], q[leg * 3 + 2]];
            base.to_world(self.leg_forward_kinematics(leg, &angles))
        })
    }

    /// Geometric IK for one leg and a world-frame foot target.
    ///
    /// HAA aligns the leg plane with the target, then planar two-link IK picks
    /// the knee branch mandated by the x-configuration. Targets at the edge of
    /// reach (within a small slack) are solved with the straight knee;
    /// anything further is an error.
    pub fn inverse_kinematics(
        &self,
        base: &Pose,
        foot_world: Vector3<f64>,
        leg: usize,
    ) -> Result<[f64; 3], RobotError> {
        if leg >= N_LEGS {
            return Err(RobotError::BadLegIndex(leg));
        }
        let d = base.to_base(foot_world) - self.hip_offsets[leg];
        let (u, l) = (self.upper_leg_len, self.lower_leg_len);
        let dist = d.norm();
        let slack = 1e-9 * self.max_leg_reach();
        if dist > self.max_leg_reach() + slack || dist < self.min_leg_reach() - slack {
            return Err(RobotError::UnreachableTarget {
                leg,
                dist,
                min: self.min_leg_reach(),
                max: self.max_leg_reach(),
            });
        }

        let alpha = if d.y == 0.0 && d.z == 0.0 { 0.0 } else { d.y.atan2(-d.z) };
        // In the HAA-resolved plane the target is (d.x, 0, -sqrt(dy^2+dz^2)).
        let planar_z = -(d.y * d.y + d.z * d.z).sqrt();

        let cos_knee = ((dist * dist - u * u - l * l) / (2.0 * u * l)).clamp(-1.0, 1.0);
        let gamma = Self::knee_sign(leg) * cos_knee.acos();
        let virtual_angle = (-d.x).atan2(-planar_z);
        let beta = virtual_angle - (l * gamma.sin()).atan2(u + l * gamma.cos());
        Ok([alpha, beta, gamma])
    }

    /// IK for all four legs at once.
    pub fn inverse_kinematics_all(
        &self,
        base: &Pose,
        feet_world: &[Vector3<f64>; N_LEGS],
    ) -> Result<[f64; N_JOINTS], RobotError> {
        let mut q = [0.0; N_JOINTS];
        for leg in 0..N_LEGS {
            let angles = self.inverse_kinematics(base, feet_world[leg], leg)?;
            q[leg * 3..leg * 3 + 3].copy_from_slice(&angles);
        }
        Ok(q)
    }

    pub fn joint_limits_ok(&self, q: &[f64; N_JOINTS]) -> bool {
        q.iter()
            .zip(&self.joint_limits)
            .all(|(&angle, &(lo, hi))| angle >= lo - 1e-9 && angle <= hi + 1e-9)
    }

    /// Nominal stance feet in the base frame: directly below each hip at the
    /// nominal stance depth (also the kinematic box centers by default).
    pub fn nominal_feet_base(&self) -> [Vector3<f64>; N_LEGS] {
        self.hip_offsets
            .map(|h| h + Vector3::new(0.0, 0.0, -self.nominal_stance_depth))
    }
}

/// Joint velocities from a joint-angle sequence by finite differences:
/// second-order central in the interior, second-order one-sided at the ends.
pub fn joint_velocities_by_differences(q: &[[f64; N_JOINTS]], dt: f64) -> Vec<[f64; N_JOINTS]> {
    assert!(q.len() >= 2, "need at least two frames");
    assert!(dt > 0.0);
    let n = q.len();
    let mut out = vec![[0.0; N_JOINTS]; n];
    for j in 0..N_JOINTS {
        if n == 2 {
            let d = (q[1][j] - q[0][j]) / dt;
            out[0][j] = d;
            out[1][j] = d;
            continue;
        }
        out[0][j] = (-3.0 * q[0][j] + 4.0 * q[1][j] - q[2][j]) / (2.0 * dt);
        for k in 1..n - 1 {
            out[k][j] = (q[k + 1][j] - q[k - 1][j]) / (2.0 * dt);
        }
        out[n - 1][j] = (3.0 * q[n - 1][j] - 4.0 * q[n - 2][j] + q[n - 3][j]) / (2.0 * dt);
    }
    out
}
