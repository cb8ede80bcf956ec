//! Tracking-task mathematics: reward terms, the truncation criterion, the
//! fine-tuning reward variant and observation assembly.
//!
//! Everything here is a pure function over a simulated state and a reference
//! clip frame — no physics, no stepping — so batched evaluation is safe to
//! parallelize.

mod observation;

pub use observation::{
    assemble_observation, render_height_image, CommandMode, ImageSnapshot, Observation,
};

use nalgebra::{UnitQuaternion, Vector3};
use thiserror::Error;

use crate::dataset::TrajectoryClip;
use crate::math;
use crate::robot::{N_JOINTS, N_LEGS};

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("body count mismatch: sim has {sim}, reference has {reference}")]
    BodyCountMismatch { sim: usize, reference: usize },
    #[error("joint count mismatch: sim has {sim}, reference has {reference}")]
    JointCountMismatch { sim: usize, reference: usize },
    #[error("frame {frame} out of range, clip has {frames} frames")]
    FrameOutOfRange { frame: usize, frames: usize },
    #[error("bad tracking config: {0}")]
    BadConfig(String),
}

/// Constants of the tracking task.
#[derive(Debug, Clone)]
pub struct TrackingConfig {
    /// Truncation threshold τ: episodes end when ε exceeds it.
    pub tau: f64,
    /// Weights of (com, ee, linvel, angvel, quat); they sum to 1.
    pub reward_weights: [f64; 5],
    /// Exponential sharpness of each term, same order.
    pub reward_exponents: [f64; 5],
    /// Height image resolution (pixels per side).
    pub image_pixels: usize,
    /// Height image side length, m.
    pub image_extent: f64,
    /// Image center distance ahead of the CoM along the heading, m.
    pub image_offset: f64,
    /// Control steps between image refreshes (10 -> 10 Hz at 100 Hz).
    pub image_interval: usize,
    /// Command lookahead, control steps.
    pub command_lookahead: usize,
    /// Fine-tuning forward-velocity target, m/s.
    pub finetune_v_target: f64,
    /// Fixed command used for evaluation and fine-tuning.
    pub eval_command: (f64, f64),
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            tau: 0.5,
            reward_weights: [0.2; 5],
            reward_exponents: [80.0, 80.0, 10.0, 10.0, 2.0],
            image_pixels: 32,
            image_extent: 1.7,
            image_offset: 0.40,
            image_interval: 10,
            command_lookahead: 10,
            finetune_v_target: 0.5,
            eval_command: (0.05, 0.0),
        }
    }
}

impl TrackingConfig {
    pub fn validate(&self) -> Result<(), TrackingError> {
        if !(self.tau > 0.0) {
            return Err(TrackingError::BadConfig(format!("tau {} must be positive", self.tau)));
        }
        let sum: f64 = self.reward_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(TrackingError::BadConfig(format!("reward weights sum to {sum}, not 1")));
        }
        if self.image_pixels < 2 || self.image_extent <= 0.0 || self.image_interval == 0 {
            return Err(TrackingError::BadConfig("bad image parameters".into()));
        }
        Ok(())
    }
}

/// Snapshot of the simulated robot, in world coordinates.
#[derive(Debug, Clone)]
pub struct SimState {
    /// Tracked body positions (base plus the four feet when built from a
    /// clip; any consistent set works as long as it matches the reference).
    pub body_positions: Vec<Vector3<f64>>,
    pub joint_positions: Vec<f64>,
    pub joint_velocities: Vec<f64>,
    pub com_pos: Vector3<f64>,
    pub com_linvel: Vector3<f64>,
    pub com_angvel: Vector3<f64>,
    pub base_quat: UnitQuaternion<f64>,
    pub ee_pos: [Vector3<f64>; N_LEGS],
    pub prev_action: Vec<f64>,
}

/// One reference frame pulled out of a clip (or built directly).
#[derive(Debug, Clone)]
pub struct RefFrame {
    pub body_positions: Vec<Vector3<f64>>,
    pub joint_positions: Vec<f64>,
    pub com_pos: Vector3<f64>,
    pub com_linvel: Vector3<f64>,
    pub com_angvel: Vector3<f64>,
    pub base_quat: UnitQuaternion<f64>,
    pub ee_pos: [Vector3<f64>; N_LEGS],
}

fn vec3(v: [f32; 3]) -> Vector3<f64> {
    Vector3::new(v[0] as f64, v[1] as f64, v[2] as f64)
}

impl RefFrame {
    /// Reference at clip frame `frame`. The tracked body set is the base
    /// plus the four end-effectors.
    pub fn from_clip(clip: &TrajectoryClip, frame: usize) -> Result<Self, TrackingError> {
        if frame >= clip.frames() {
            return Err(TrackingError::FrameOutOfRange { frame, frames: clip.frames() });
        }
        let com_pos = vec3(clip.com_pos[frame]);
        let ee_pos: [Vector3<f64>; N_LEGS] =
            std::array::from_fn(|leg| vec3(clip.ee_pos[frame][leg]));
        let mut body_positions = Vec::with_capacity(1 + N_LEGS);
        body_positions.push(com_pos);
        body_positions.extend_from_slice(&ee_pos);
        let quat = clip.base_quat[frame];
        Ok(RefFrame {
            body_positions,
            joint_positions: clip.q[frame].iter().map(|&v| v as f64).collect(),
            com_pos,
            com_linvel: vec3(clip.com_linvel[frame]),
            com_angvel: vec3(clip.com_angvel[frame]),
            base_quat: UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                quat[0] as f64,
                quat[1] as f64,
                quat[2] as f64,
                quat[3] as f64,
            )),
            ee_pos,
        })
    }
}

impl SimState {
    /// A simulated state in perfect agreement with `reference`, with zeroed
    /// velocities-of-record for channels the reference does not carry.
    pub fn matching(reference: &RefFrame) -> Self {
        SimState {
            body_positions: reference.body_positions.clone(),
            joint_positions: reference.joint_positions.clone(),
            joint_velocities: vec![0.0; reference.joint_positions.len()],
            com_pos: reference.com_pos,
            com_linvel: reference.com_linvel,
            com_angvel: reference.com_angvel,
            base_quat: reference.base_quat,
            ee_pos: reference.ee_pos,
            prev_action: vec![0.0; N_JOINTS],
        }
    }
}

/// Truncation verdict for one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Mean L1 deviation: body term scaled by 1/(3|B|) plus joint term
    /// scaled by 1/|J|.
    pub epsilon: f64,
    /// 1 - ε/τ.
    pub r_trunc: f64,
    /// True when ε strictly exceeds τ.
    pub terminate: bool,
}

/// Deviation of the simulated state from the reference and the termination
/// decision.
///
/// ε is the mean per-axis L1 body-position error plus the mean L1 joint
/// error; the episode terminates when ε > τ (strictly — equality keeps the
/// episode alive).
pub fn truncation_error(
    sim: &SimState,
    reference: &RefFrame,
    config: &TrackingConfig,
) -> Result<Truncation, TrackingError> {
    if sim.body_positions.len() != reference.body_positions.len() {
        return Err(TrackingError::BodyCountMismatch {
            sim: sim.body_positions.len(),
            reference: reference.body_positions.len(),
        });
    }
    if sim.joint_positions.len() != reference.joint_positions.len() {
        return Err(TrackingError::JointCountMismatch {
            sim: sim.joint_positions.len(),
            reference: reference.joint_positions.len(),
        });
    }
    let n_bodies = sim.body_positions.len();
    let n_joints = sim.joint_positions.len();
    let body_l1: f64 = sim
        .body_positions
        .iter()
        .zip(&reference.body_positions)
        .map(|(p, r)| (p - r).abs().sum())
        .sum();
    let joint_l1: f64 = sim
        .joint_positions
        .iter()
        .zip(&reference.joint_positions)
        .map(|(q, r)| (q - r).abs())
        .sum();
    let mut epsilon = 0.0;
    if n_bodies > 0 {
        epsilon += body_l1 / (3.0 * n_bodies as f64);
    }
    if n_joints > 0 {
        epsilon += joint_l1 / n_joints as f64;
    }
    Ok(Truncation {
        epsilon,
        r_trunc: 1.0 - epsilon / config.tau,
        terminate: epsilon > config.tau,
    })
}

/// The five tracking reward terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms {
    pub com: f64,
    pub ee: f64,
    pub linvel: f64,
    pub angvel: f64,
    pub quat: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.com + self.ee + self.linvel + self.angvel + self.quat
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.com, self.ee, self.linvel, self.angvel, self.quat]
    }
}

/// The five-term tracking reward.
///
/// Each term is `w * exp(-k * error²)` with the configured weight and
/// sharpness: CoM position, summed end-effector positions, CoM linear and
/// angular velocity, and base orientation. The orientation error is the
/// rotation-vector norm of the relative quaternion.
pub fn tracking_rewards(
    sim: &SimState,
    reference: &RefFrame,
    config: &TrackingConfig,
) -> RewardTerms {
    let w = &config.reward_weights;
    let k = &config.reward_exponents;
    let ee_sq: f64 = sim
        .ee_pos
        .iter()
        .zip(&reference.ee_pos)
        .map(|(p, r)| (p - r).norm_squared())
        .sum();
    let quat_err = math::quaternion_distance(&sim.base_quat, &reference.base_quat);
    RewardTerms {
        com: w[0] * (-k[0] * (sim.com_pos - reference.com_pos).norm_squared()).exp(),
        ee: w[1] * (-k[1] * ee_sq).exp(),
        linvel: w[2] * (-k[2] * (sim.com_linvel - reference.com_linvel).norm_squared()).exp(),
        angvel: w[3] * (-k[3] * (sim.com_angvel - reference.com_angvel).norm_squared()).exp(),
        quat: w[4] * (-k[4] * quat_err * quat_err).exp(),
    }
}

/// Fine-tuning reward: the CoM term with its squared error replaced by
/// `(v_x - v_target)² + y²`; the other four terms are dropped. The lateral
/// term uses the simulated CoM y so it penalizes drift off the x-axis.
pub fn finetune_reward(sim: &SimState, config: &TrackingConfig) -> f64 {
    let v_err = sim.com_linvel.x - config.finetune_v_target;
    let y = sim.com_pos.y;
    config.reward_weights[0] * (-config.reward_exponents[0] * (v_err * v_err + y * y)).exp()
}

/// A contact reported by the simulator, labelled by the robot body involved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactBody {
    /// One of the four feet touching the environment (leg index).
    EndEffector(usize),
    /// Any other robot body touching the environment.
    Other,
}

/// True when any reported contact involves a non-end-effector body; such
/// contacts end the episode.
pub fn non_foot_contact_termination(contacts: &[ContactBody]) -> bool {
    contacts.iter().any(|c| !matches!(c, ContactBody::EndEffector(_)))
}
