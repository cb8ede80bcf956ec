//! Imitation clips: planned trajectories discretized at 100 Hz.
//!
//! A clip pairs the planning terrain image with per-frame channels — CoM
//! kinematics, base orientation, end-effector positions, binary contact
//! indicators and IK joint states — all quantized to f32 at construction so
//! the on-disk format (raw little-endian f32 arrays) round-trips exactly.

mod io;
mod stats;

pub use io::{load_clip, save_clip};
pub use stats::{dataset_stats, render_onset_table, render_velocity_table, DatasetStats};

use thiserror::Error;

use crate::heightfield::HeightField;
use crate::math;
use crate::nlp::SolveStatus;
use crate::planner::CentroidalSolution;
use crate::robot::{
    joint_velocities_by_differences, Pose, RobotError, RobotModel, N_JOINTS, N_LEGS,
};
use crate::spline::SplineError;

/// Sampling rate of every clip channel, frames per second.
pub const CLIP_RATE_HZ: f64 = 100.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("solution did not converge (status {status:?}); refusing to sample a clip")]
    NotConverged { status: SolveStatus },
    #[error("clip rejected: IK failed at frame {frame} (t = {time:.3} s): {source}")]
    IkFailure {
        frame: usize,
        time: f64,
        #[source]
        source: RobotError,
    },
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error("clip channel lengths disagree: {channel} has {got} frames, expected {expected}")]
    ChannelLength { channel: &'static str, got: usize, expected: usize },
    #[error("frame {frame} base quaternion norm {norm} deviates from 1 beyond 1e-6")]
    BadQuaternion { frame: usize, norm: f64 },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad clip data in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("clip channel {channel} missing or unreadable at {path}: {source}")]
    MissingChannel {
        channel: String,
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("clip channel {channel} holds {got} frames but the manifest declares {expected}")]
    FrameCountMismatch { channel: String, expected: usize, got: usize },
    #[error("dataset statistics need at least one clip")]
    EmptyDataset,
}

/// One planned trajectory sampled at 100 Hz plus its terrain image.
///
/// All per-frame channels share a single clock: frame `k` is time
/// `k / 100` s, and every vector has `frames()` entries. Values are f32 —
/// the quantization happens here, once, so disk round-trips are bit-exact.
/// `base_quat` stores ZYX-Euler-derived unit quaternions as `[w, x, y, z]`.
/// `terrain_image` is the planning terrain (pre-distortion); its heights are
/// also f32-quantized.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryClip {
    pub horizon: f64,
    pub terrain_image: HeightField,
    /// Seed of the terrain generator; 0 when sampled outside the pipeline.
    pub terrain_seed: u64,
    /// FNV-1a hash of the robot configuration rendering.
    pub robot_hash: u64,
    pub com_pos: Vec<[f32; 3]>,
    pub com_linvel: Vec<[f32; 3]>,
    pub com_angvel: Vec<[f32; 3]>,
    pub base_quat: Vec<[f32; 4]>,
    pub ee_pos: Vec<[[f32; 3]; N_LEGS]>,
    pub contact_flags: Vec<[bool; N_LEGS]>,
    pub q: Vec<[f32; N_JOINTS]>,
    pub qdot: Vec<[f32; N_JOINTS]>,
}

impl TrajectoryClip {
    pub fn frames(&self) -> usize {
        self.com_pos.len()
    }

    /// Time of frame `k` on the shared clock.
    pub fn frame_time(&self, k: usize) -> f64 {
        (k as f64 / CLIP_RATE_HZ).min(self.horizon)
    }

    /// Frame count mandated by the horizon: `round(T * 100) + 1`.
    pub fn expected_frames(horizon: f64) -> usize {
        (horizon * CLIP_RATE_HZ).round() as usize + 1
    }

    /// Check the cross-channel invariants: equal lengths, the mandated frame
    /// count and unit quaternions (within 1e-6; f32 storage costs ~1e-7).
    pub fn validate(&self) -> Result<(), DatasetError> {
        let expected = Self::expected_frames(self.horizon);
        for (channel, got) in [
            ("com_pos", self.com_pos.len()),
            ("com_linvel", self.com_linvel.len()),
            ("com_angvel", self.com_angvel.len()),
            ("base_quat", self.base_quat.len()),
            ("ee_pos", self.ee_pos.len()),
            ("contact_flags", self.contact_flags.len()),
            ("q", self.q.len()),
            ("qdot", self.qdot.len()),
        ] {
            if got != expected {
                return Err(DatasetError::ChannelLength { channel, got, expected });
            }
        }
        for (frame, quat) in self.base_quat.iter().enumerate() {
            let norm = quat.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(DatasetError::BadQuaternion { frame, norm });
            }
        }
        Ok(())
    }

    /// Contact onsets of one leg: frames where it enters contact, including
    /// frame 0 if the clip starts in contact.
    pub fn contact_onsets(&self, leg: usize) -> Vec<usize> {
        let mut onsets = Vec::new();
        let mut prev = false;
        for (k, flags) in self.contact_flags.iter().enumerate() {
            if flags[leg] && !prev {
                onsets.push(k);
            }
            prev = flags[leg];
        }
        onsets
    }
}

/// Discretize a converged solution into a clip.
///
/// Splines are evaluated every 0.01 s; the base quaternion comes from the
/// ZYX Euler orientation channel and the angular velocity from the Euler
/// rates; contact indicators follow the phase schedule with left-closed
/// intervals (a boundary instant belongs to the ending phase); joint angles
/// are per-frame IK solutions and joint velocities their second-order finite
/// differences. Any unreachable foot target rejects the whole clip.
pub fn sample_clip(
    solution: &CentroidalSolution,
    terrain: &HeightField,
    model: &RobotModel,
) -> Result<TrajectoryClip, DatasetError> {
    if solution.report.status != SolveStatus::Converged {
        return Err(DatasetError::NotConverged { status: solution.report.status });
    }
    let n = TrajectoryClip::expected_frames(solution.horizon);
    let dt = 1.0 / CLIP_RATE_HZ;

    let mut com_pos = Vec::with_capacity(n);
    let mut com_linvel = Vec::with_capacity(n);
    let mut com_angvel = Vec::with_capacity(n);
    let mut base_quat = Vec::with_capacity(n);
    let mut ee_pos = Vec::with_capacity(n);
    let mut contact_flags = Vec::with_capacity(n);
    let mut q_frames: Vec<[f64; N_JOINTS]> = Vec::with_capacity(n);

    for k in 0..n {
        let t = (k as f64 * dt).min(solution.horizon);
        let (r, rdot, _) = solution.com_pos.eval(t)?;
        let (theta, theta_dot, _) = solution.com_ang.eval(t)?;
        let quat = math::quaternion_from_euler(&theta);
        let omega = math::angular_velocity(&theta, &theta_dot);

        let mut feet = [nalgebra::Vector3::zeros(); N_LEGS];
        let mut flags = [false; N_LEGS];
        for leg in 0..N_LEGS {
            feet[leg] = solution.ee[leg].value(t)?;
            flags[leg] = solution.in_stance(leg, t);
        }

        let base = Pose::from_euler(r, theta);
        let q = model
            .inverse_kinematics_all(&base, &feet)
            .map_err(|source| DatasetError::IkFailure { frame: k, time: t, source })?;

        com_pos.push([r.x as f32, r.y as f32, r.z as f32]);
        com_linvel.push([rdot.x as f32, rdot.y as f32, rdot.z as f32]);
        com_angvel.push([omega.x as f32, omega.y as f32, omega.z as f32]);
        base_quat.push([quat.w as f32, quat.i as f32, quat.j as f32, quat.k as f32]);
        ee_pos.push(std::array::from_fn(|leg| {
            [feet[leg].x as f32, feet[leg].y as f32, feet[leg].z as f32]
        }));
        contact_flags.push(flags);
        q_frames.push(q);
    }

    let qdot_frames = joint_velocities_by_differences(&q_frames, dt);
    let to_f32 = |frame: &[f64; N_JOINTS]| -> [f32; N_JOINTS] { frame.map(|v| v as f32) };

    let clip = TrajectoryClip {
        horizon: solution.horizon,
        terrain_image: quantize_heightfield(terrain),
        terrain_seed: 0,
        robot_hash: math::fnv1a(model.to_key_values().render().as_bytes()),
        com_pos,
        com_linvel,
        com_angvel,
        base_quat,
        ee_pos,
        contact_flags,
        q: q_frames.iter().map(to_f32).collect(),
        qdot: qdot_frames.iter().map(to_f32).collect(),
    };
    clip.validate()?;
    Ok(clip)
}

/// Round every height through f32 so the in-memory field equals the stored
/// one exactly.
fn quantize_heightfield(field: &HeightField) -> HeightField {
    let heights: Vec<f64> = field.heights().iter().map(|&h| h as f32 as f64).collect();
    HeightField::new(
        field.origin(),
        field.cell_size(),
        field.rows(),
        field.cols(),
        heights,
    )
    .expect("quantized heights stay finite and non-negative")
}
