//! Trajectory-optimization toolkit for quadruped locomotion datasets.
//!
//! Generates procedural terrains, plans dynamically consistent centroidal
//! trajectories over them with phase-based end-effector splines, samples the
//! results into 100 Hz imitation clips, applies contact-preserving terrain
//! distortion, and provides the reward/observation math and evaluation
//! terrains for tracking those clips.

pub mod config;
pub mod dataset;
pub mod envgen;
pub mod heightfield;
pub mod nlp;
pub mod math;
pub mod planner;
pub mod robot;
pub mod spline;
pub mod tracking;

pub use dataset::{dataset_stats, load_clip, sample_clip, save_clip, TrajectoryClip};
pub use heightfield::{DistortionSpec, GenerateParams, HeightField};
pub use planner::{plan, AuditReport, CentroidalSolution, PlannerConfig};
pub use robot::{JointState, Pose, RobotModel};
pub use spline::{PhaseKind, PhaseSchedule, PhaseSpline};
