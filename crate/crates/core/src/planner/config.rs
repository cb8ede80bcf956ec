//! Planner configuration: horizon, goal, constraint grids, bounds and
//! initialization noise.

use nalgebra::Vector2;

use super::PlannerError;

/// Parameters of one trajectory-optimization problem.
///
/// Defaults reproduce the dataset-generation setting: a 4.6 s fly-trot
/// reaching a goal 2.3 m ahead, with four swing phases per leg.
#[derive(Debug, Clone)]
pub struct PlannerConfig {
    /// Total horizon `T` in seconds.
    pub horizon: f64,
    /// Forward (+x) CoM displacement demanded at `T`, meters.
    pub goal_displacement: f64,
    /// Start CoM position in the ground plane; feet start at the nominal
    /// stance around this point.
    pub start_xy: Vector2<f64>,
    /// Swing phases per leg; every leg starts and ends in stance, so the
    /// phase count is `2 * n_swing_phases + 1`. Zero means standing.
    pub n_swing_phases: usize,
    /// Uniform segments of the CoM position and orientation splines.
    pub n_com_segments: usize,
    /// Sampling interval of the dynamics equality constraints, seconds.
    pub dynamics_dt: f64,
    /// Sampling interval of the force-cone inequalities within each stance
    /// phase (nodes are always included as well), seconds.
    pub force_constraint_dt: f64,
    /// Sampling interval of the swing ground-clearance inequalities, seconds.
    pub swing_constraint_dt: f64,
    /// Upper bound on the normal force per foot, newtons.
    pub f_max: f64,
    /// Box bounds applied to every phase-duration variable, seconds.
    pub phase_duration_min: f64,
    pub phase_duration_max: f64,
    /// Initialization noise: std of the Gaussian added to position-valued
    /// nodes (meters) and to force nodes (newtons).
    pub init_pos_noise: f64,
    pub init_force_noise: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Evaluate the kinematic leg boxes in the full base orientation instead
    /// of the yaw-only frame.
    pub full_orientation_box: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            horizon: 4.6,
            goal_displacement: 2.3,
            start_xy: Vector2::zeros(),
            n_swing_phases: 4,
            n_com_segments: 10,
            dynamics_dt: 0.1,
            force_constraint_dt: 0.08,
            swing_constraint_dt: 0.04,
            // Twice the default body weight (30 kg).
            f_max: 2.0 * 30.0 * 9.81,
            phase_duration_min: 0.1,
            phase_duration_max: 2.0,
            init_pos_noise: 0.10,
            init_force_noise: 5.0,
            gravity: 9.81,
            full_orientation_box: false,
        }
    }
}

impl PlannerConfig {
    /// Short walking problem: 2 s horizon, two swing phases per leg, goal
    /// 0.8 m ahead (same 0.4 m/s average progress as the default problem
    /// commands per gait cycle). Used for fast smoke solves.
    pub fn short_walk() -> Self {
        PlannerConfig {
            horizon: 2.0,
            goal_displacement: 0.8,
            n_swing_phases: 2,
            ..PlannerConfig::default()
        }
    }

    /// Standing problem: no swing phases, goal displacement zero.
    pub fn standing(horizon: f64) -> Self {
        PlannerConfig {
            horizon,
            goal_displacement: 0.0,
            n_swing_phases: 0,
            ..PlannerConfig::default()
        }
    }

    pub fn n_phases(&self) -> usize {
        2 * self.n_swing_phases + 1
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let reject = |what: &str| {
            Err(PlannerError::BadConfig {
                message: what.to_string(),
            })
        };
        if !(self.horizon > 0.0) {
            return reject("horizon must be positive");
        }
        for (name, dt) in [
            ("dynamics_dt", self.dynamics_dt),
            ("force_constraint_dt", self.force_constraint_dt),
            ("swing_constraint_dt", self.swing_constraint_dt),
        ] {
            if !(dt > 0.0 && dt <= self.horizon) {
                return reject(&format!("{name} must lie in (0, horizon]"));
            }
        }
        if self.n_com_segments < 2 {
            return reject("need at least two CoM segments");
        }
        if !(self.f_max > 0.0) {
            return reject("f_max must be positive");
        }
        if !(self.phase_duration_min > 0.0 && self.phase_duration_min <= self.phase_duration_max) {
            return reject("phase duration bounds must satisfy 0 < min <= max");
        }
        let n = self.n_phases() as f64;
        if self.phase_duration_min * n > self.horizon || self.phase_duration_max * n < self.horizon {
            return reject("phase duration bounds cannot reach the horizon");
        }
        if self.init_pos_noise < 0.0 || self.init_force_noise < 0.0 {
            return reject("initialization noise must be non-negative");
        }
        if !(self.gravity > 0.0) {
            return reject("gravity must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        PlannerConfig::default().validate().unwrap();
        PlannerConfig::short_walk().validate().unwrap();
        PlannerConfig::standing(2.0).validate().unwrap();
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut c = PlannerConfig::default();
        c.dynamics_dt = 0.0;
        assert!(c.validate().is_err());

        let mut c = PlannerConfig::default();
        c.phase_duration_max = 0.3; // 9 phases x 0.3 < 4.6
        assert!(c.validate().is_err());

        let mut c = PlannerConfig::default();
        c.horizon = -1.0;
        assert!(c.validate().is_err());
    }
}
