//! Observation assembly: the per-step feature tuple seen by a tracking
//! policy, including the local height image and the position command.

use nalgebra::{Rotation3, Vector2, Vector3};

use super::{SimState, TrackingConfig, TrackingError};
use crate::dataset::TrajectoryClip;
use crate::heightfield::HeightField;
use crate::robot::{Pose, N_LEGS};

/// How the position command z(t) is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandMode {
    /// Read ahead in the reference clip.
    Tracking,
    /// Fixed command, used for zero-shot evaluation and fine-tuning.
    Evaluation,
}

/// The height image together with the base pose at the step it was
/// rendered. Carried across steps so the image only refreshes on its own
/// clock, and so the relative-pose features have a fixed anchor in between.
#[derive(Debug, Clone)]
pub struct ImageSnapshot {
    /// Control step at which the image was rendered.
    pub frame: usize,
    /// Base pose at that step.
    pub pose: Pose,
    /// Row-major pixels, rows along the heading; see [`render_height_image`].
    pub image: Vec<f64>,
}

/// One step's feature tuple.
///
/// World-frame quantities come straight from the state; end-effector
/// positions are re-expressed in the base frame so the tuple carries no
/// absolute position beyond what the task needs (the base height, the
/// absolute CoM y and the command).
#[derive(Debug, Clone)]
pub struct Observation {
    /// Local height image, row-major, rows along the heading.
    pub height_image: Vec<f64>,
    pub joint_positions: Vec<f64>,
    pub joint_velocities: Vec<f64>,
    /// Base linear velocity, world frame.
    pub base_linvel: Vector3<f64>,
    /// Base angular velocity, world frame.
    pub base_angvel: Vector3<f64>,
    /// End-effector positions in the base frame.
    pub ee_positions: [Vector3<f64>; N_LEGS],
    /// Absolute height of the base.
    pub base_height: f64,
    /// Base orientation as a rotation matrix.
    pub base_rotation: Rotation3<f64>,
    /// Base position relative to the pose at the last image refresh,
    /// expressed in that pose's frame.
    pub rel_position: Vector3<f64>,
    /// Base orientation relative to the pose at the last image refresh.
    pub rel_rotation: Rotation3<f64>,
    pub prev_action: Vec<f64>,
    /// Absolute CoM y coordinate.
    pub com_y: f64,
    /// Position command z(t): relative reference x ten steps ahead and the
    /// absolute reference y there — or the fixed evaluation command.
    pub command: (f64, f64),
}

/// Render the local height image: `pixels × pixels` samples covering an
/// `extent × extent` square centered `offset` ahead of the CoM along the
/// yaw heading. Row index walks the heading (+x local), column index the
/// left (+y local); samples sit at pixel centers. Queries outside the
/// terrain footprint take the height of the nearest footprint point, so the
/// image degrades to edge padding rather than failing.
pub fn render_height_image(
    terrain: &HeightField,
    com_pos: &Vector3<f64>,
    yaw: f64,
    config: &TrackingConfig,
) -> Vec<f64> {
    let n = config.image_pixels;
    let (sin, cos) = yaw.sin_cos();
    let mut image = Vec::with_capacity(n * n);
    for row in 0..n {
        let lx = config.image_offset + config.image_extent * ((row as f64 + 0.5) / n as f64 - 0.5);
        for col in 0..n {
            let ly = config.image_extent * ((col as f64 + 0.5) / n as f64 - 0.5);
            let world = Vector2::new(
                com_pos.x + cos * lx - sin * ly,
                com_pos.y + sin * lx + cos * ly,
            );
            image.push(terrain.height_at_clamped(world));
        }
    }
    image
}

/// Assemble the feature tuple for control step `frame`.
///
/// The height image refreshes only when `frame` enters a new image tick
/// (every `image_interval` steps, 10 Hz at the 100 Hz control rate) or when
/// no snapshot exists yet; in between, the previous snapshot's image is
/// observed unchanged and the relative pose (c, X̂) is measured against the
/// pose stored in it. Returns the observation plus the snapshot to carry
/// into the next step.
pub fn assemble_observation(
    sim: &SimState,
    terrain: &HeightField,
    clip: &TrajectoryClip,
    frame: usize,
    last_image: Option<&ImageSnapshot>,
    config: &TrackingConfig,
    mode: CommandMode,
) -> Result<(Observation, ImageSnapshot), TrackingError> {
    if frame >= clip.frames() {
        return Err(TrackingError::FrameOutOfRange { frame, frames: clip.frames() });
    }

    let refresh = match last_image {
        None => true,
        Some(s) => frame / config.image_interval != s.frame / config.image_interval,
    };
    let snapshot = if refresh {
        let (_, _, yaw) = sim.base_quat.euler_angles();
        ImageSnapshot {
            frame,
            pose: Pose::new(sim.com_pos, sim.base_quat.to_rotation_matrix()),
            image: render_height_image(terrain, &sim.com_pos, yaw, config),
        }
    } else {
        last_image.unwrap().clone()
    };

    let base_rotation = sim.base_quat.to_rotation_matrix();
    let anchor = &snapshot.pose;
    let rel_position = anchor.rotation.inverse() * (sim.com_pos - anchor.position);
    let rel_rotation = anchor.rotation.inverse() * base_rotation;

    let command = match mode {
        CommandMode::Evaluation => config.eval_command,
        CommandMode::Tracking => {
            let ahead = (frame + config.command_lookahead).min(clip.frames() - 1);
            (
                clip.com_pos[ahead][0] as f64 - sim.com_pos.x,
                clip.com_pos[ahead][1] as f64,
            )
        }
    };

    let base = Pose::new(sim.com_pos, base_rotation);
    let observation = Observation {
        height_image: snapshot.image.clone(),
        joint_positions: sim.joint_positions.clone(),
        joint_velocities: sim.joint_velocities.clone(),
        base_linvel: sim.com_linvel,
        base_angvel: sim.com_angvel,
        ee_positions: sim.ee_pos.map(|p| base.to_base(p)),
        base_height: sim.com_pos.z,
        base_rotation,
        rel_position,
        rel_rotation,
        prev_action: sim.prev_action.clone(),
        com_y: sim.com_pos.y,
        command,
    };
    Ok((observation, snapshot))
}
