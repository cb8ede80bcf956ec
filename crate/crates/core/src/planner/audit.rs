//! Solver-independent verification of a planned trajectory.
//!
//! The audit never touches the NLP machinery: it reconstructs every residual
//! directly from the solution splines, the terrain and the model, on grids it
//! derives itself from the *solved* phase durations. Constraint classes are
//! reported separately, together with two fine-grained (10 ms) physical
//! scans: worst normal force and worst swing clearance.

use nalgebra::Vector3;

use crate::heightfield::HeightField;
use crate::math;
use crate::robot::{RobotModel, LEG_NAMES, N_LEGS};
use crate::spline::PhaseKind;

use super::blocks::TORQUE_LEVER;
use super::solution::CentroidalSolution;
use super::PlannerConfig;

/// Sampling interval of the fine physical scans.
const FINE_DT: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct AuditEntry {
    pub name: String,
    /// Worst violation: `|c|` for equalities, `max(0, -g)` for inequalities.
    pub worst: f64,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
    pub max_violation: f64,
    /// Minimum of `f . n / f_max` over all stance time at 10 ms resolution.
    pub min_normal_force: f64,
    /// Minimum ground clearance (m) over all swing time at 10 ms resolution.
    pub min_swing_clearance: f64,
}

impl AuditReport {
    pub fn entry(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.worst)
    }
}

struct Recorder {
    entries: Vec<AuditEntry>,
}

impl Recorder {
    fn new() -> Self {
        Recorder { entries: Vec::new() }
    }

    fn equality(&mut self, name: &str, residual: f64) {
        self.record(name, residual.abs());
    }

    fn inequality(&mut self, name: &str, residual: f64) {
        self.record(name, (-residual).max(0.0));
    }

    fn record(&mut self, name: &str, violation: f64) {
        match self.entries.iter_mut().find(|e| e.name == name) {
            Some(e) => e.worst = e.worst.max(violation),
            None => self.entries.push(AuditEntry {
                name: name.to_string(),
                worst: violation,
            }),
        }
    }
}

/// Absolute sample times of one phase: its Hermite nodes plus a `dt` grid.
fn phase_times(start: f64, duration: f64, dt: f64, nodes: &[f64]) -> Vec<f64> {
    let n = (duration / dt - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| start + duration * k as f64 / n as f64).collect();
    times.extend(nodes.iter().map(|&f| start + duration * f));
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    times
}

/// Contact frame on the terrain below `xy`: normal and two tangents.
fn contact_frame(terrain: &HeightField, xy: nalgebra::Vector2<f64>) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let n = terrain.sample_at_clamped(xy).normal;
    let mut t1 = Vector3::x() - n * n.x;
    if t1.norm() < 1e-9 {
        t1 = Vector3::y() - n * n.y;
    }
    let t1 = t1.normalize();
    (n, t1, n.cross(&t1))
}

/// Re-derive every constraint residual of `solution` and scan the contact
/// physics at 10 ms resolution.
pub fn audit_solution(
    solution: &CentroidalSolution,
    model: &RobotModel,
    terrain: &HeightField,
    config: &PlannerConfig,
) -> AuditReport {
    let mut rec = Recorder::new();
    let t_total = config.horizon;
    let m = model.mass;
    let g = config.gravity;
    let g_vec = Vector3::new(0.0, 0.0, -g);
    let clamp_t = |t: f64| t.min(t_total).max(0.0);

    // Dynamics on the absolute grid. The CoM splines are C1, so their
    // accelerations jump at knots; nudging each sample to both sides checks
    // the two one-sided limits without caring how the planner broke ties.
    let mut t = 0.0;
    while t <= t_total + 1e-9 {
        for tq in [clamp_t(t - 1e-7), clamp_t(t + 1e-7)] {
            let (_, _, r_ddot) = solution.com_pos.eval(tq).unwrap();
            let (theta, theta_dot, theta_ddot) = solution.com_ang.eval(tq).unwrap();
            let r = solution.com_pos.value(tq).unwrap();

            let mut f_sum = Vector3::zeros();
            let mut torque = Vector3::zeros();
            for leg in 0..N_LEGS {
                let f = solution.force[leg].value(tq).unwrap();
                let p = solution.ee[leg].value(tq).unwrap();
                f_sum += f;
                torque += (p - r).cross(&f);
            }
            let lin = (r_ddot - g_vec) / g - f_sum / (m * g);
            for c in 0..3 {
                rec.equality("dynamics-linear", lin[c]);
            }

            let rot = math::rotation(&theta);
            let i_w = rot * model.body_inertia * rot.transpose();
            let c_map = math::euler_rate_map(&theta);
            let dc = math::euler_rate_map_partials(&theta);
            let w = c_map * theta_dot;
            let c_dot = dc[0] * theta_dot[0] + dc[1] * theta_dot[1] + dc[2] * theta_dot[2];
            let w_dot = c_map * theta_ddot + c_dot * theta_dot;
            let ang = (i_w * w_dot + w.cross(&(i_w * w)) - torque) / (m * g * TORQUE_LEVER);
            for c in 0..3 {
                rec.equality("dynamics-angular", ang[c]);
            }
        }
        t += config.dynamics_dt;
    }

    // Kinematic boxes on the same grid.
    let mut t = 0.0;
    while t <= t_total + 1e-9 {
        let tq = clamp_t(t);
        let r = solution.com_pos.value(tq).unwrap();
        let theta = solution.com_ang.value(tq).unwrap();
        let rot = if config.full_orientation_box {
            math::rotation(&theta)
        } else {
            math::yaw_rotation(theta.z)
        };
        for leg in 0..N_LEGS {
            let name = format!("kinematic-box[{}]", LEG_NAMES[leg]);
            let p = solution.ee[leg].value(tq).unwrap();
            let rel = rot.transpose() * (p - r);
            let lo = model.kinematic_box_centers[leg] - model.kinematic_box_half_extents[leg];
            let hi = model.kinematic_box_centers[leg] + model.kinematic_box_half_extents[leg];
            for c in 0..3 {
                rec.inequality(&name, rel[c] - lo[c]);
                rec.inequality(&name, hi[c] - rel[c]);
            }
        }
        t += config.dynamics_dt;
    }

    // Per-phase constraints from the solved schedules.
    for leg in 0..N_LEGS {
        let schedule = solution.schedule(leg);
        let force = &solution.force[leg];
        let ee = &solution.ee[leg];
        let mut start = 0.0;
        for (phase, &duration) in schedule.durations.iter().enumerate() {
            match schedule.kind(phase) {
                PhaseKind::Stance => {
                    let name = format!("force-cone[{}]", LEG_NAMES[leg]);
                    let contact = ee.value(clamp_t(start + 0.5 * duration)).unwrap();
                    let (n, t1, t2) = contact_frame(terrain, nalgebra::Vector2::new(contact.x, contact.y));
                    let mu = model.friction_mu;
                    for t in phase_times(start, duration, config.force_constraint_dt, &[1.0 / 3.0, 2.0 / 3.0]) {
                        let f = force.value(clamp_t(t)).unwrap();
                        let f_n = f.dot(&n);
                        rec.inequality(&name, f_n / config.f_max);
                        rec.inequality(&name, (config.f_max - f_n) / config.f_max);
                        for tang in [&t1, &t2] {
                            let f_t = f.dot(tang);
                            rec.inequality(&name, (mu * f_n - f_t) / config.f_max);
                            rec.inequality(&name, (mu * f_n + f_t) / config.f_max);
                        }
                    }

                    let pin = format!("stance-pin[{}]", LEG_NAMES[leg]);
                    let h = terrain
                        .sample_at_clamped(nalgebra::Vector2::new(contact.x, contact.y))
                        .height;
                    rec.equality(&pin, contact.z - h);
                    // Contacts must be stationary: probe spread across the phase.
                    let hold = format!("stance-hold[{}]", LEG_NAMES[leg]);
                    for frac in [0.0, 0.25, 0.75, 1.0] {
                        let p = ee.value(clamp_t(start + frac * duration)).unwrap();
                        rec.equality(&hold, (p - contact).norm());
                    }
                }
                PhaseKind::Swing => {
                    let name = format!("swing-clearance[{}]", LEG_NAMES[leg]);
                    for t in phase_times(start, duration, config.swing_constraint_dt, &[0.5]) {
                        let p = ee.value(clamp_t(t)).unwrap();
                        let h = terrain.sample_at_clamped(nalgebra::Vector2::new(p.x, p.y)).height;
                        rec.inequality(&name, p.z - h);
                    }
                }
            }
            start += duration;
        }
        rec.equality(
            &format!("phase-sum[{}]", LEG_NAMES[leg]),
            schedule.total() - t_total,
        );
    }

    // Boundary conditions.
    let start_xy = config.start_xy;
    let start_z = terrain.height_at_clamped(start_xy) + model.nominal_stance_depth;
    let goal_xy = start_xy + nalgebra::Vector2::new(config.goal_displacement, 0.0);
    let goal_z = terrain.height_at_clamped(goal_xy) + model.nominal_stance_depth;
    let (r0, v0, _) = solution.com_pos.eval(0.0).unwrap();
    let (rt, vt, _) = solution.com_pos.eval(t_total).unwrap();
    let (th0, om0, _) = solution.com_ang.eval(0.0).unwrap();
    let (_, omt, _) = solution.com_ang.eval(t_total).unwrap();
    let start_target = Vector3::new(start_xy.x, start_xy.y, start_z);
    let goal_target = Vector3::new(goal_xy.x, goal_xy.y, goal_z);
    for c in 0..3 {
        rec.equality("boundary", r0[c] - start_target[c]);
        rec.equality("boundary", v0[c]);
        rec.equality("boundary", th0[c]);
        rec.equality("boundary", om0[c]);
        rec.equality("boundary", rt[c] - goal_target[c]);
        rec.equality("boundary", vt[c]);
        rec.equality("boundary", omt[c]);
    }
    for (leg, foot) in model.nominal_feet_base().iter().enumerate() {
        let p = solution.ee[leg].value(0.0).unwrap();
        rec.equality("boundary", p.x - (start_xy.x + foot.x));
        rec.equality("boundary", p.y - (start_xy.y + foot.y));
    }

    // Fine scans at 10 ms.
    let mut min_normal_force = f64::INFINITY;
    let mut min_swing_clearance = f64::INFINITY;
    for leg in 0..N_LEGS {
        let schedule = solution.schedule(leg);
        let mut t = 0.0;
        while t <= t_total + 1e-9 {
            let tq = clamp_t(t);
            if schedule.in_stance(tq) {
                let p = solution.ee[leg].value(tq).unwrap();
                let (n, _, _) = contact_frame(terrain, nalgebra::Vector2::new(p.x, p.y));
                let f = solution.force[leg].value(tq).unwrap();
                min_normal_force = min_normal_force.min(f.dot(&n) / config.f_max);
            } else {
                let p = solution.ee[leg].value(tq).unwrap();
                let h = terrain.sample_at_clamped(nalgebra::Vector2::new(p.x, p.y)).height;
                min_swing_clearance = min_swing_clearance.min(p.z - h);
            }
            t += FINE_DT;
        }
    }
    if !min_normal_force.is_finite() {
        min_normal_force = 0.0;
    }
    if !min_swing_clearance.is_finite() {
        min_swing_clearance = 0.0;
    }

    let max_violation = rec
        .entries
        .iter()
        .map(|e| e.worst)
        .fold(0.0f64, f64::max);
    AuditReport {
        entries: rec.entries,
        max_violation,
        min_normal_force,
        min_swing_clearance,
    }
}

/// Worst dynamics violation of a spline set that is *not* a solution; used by
/// tests to confirm the audit rejects physically wrong trajectories.
pub fn is_physically_plausible(report: &AuditReport, tol: f64) -> bool {
    report.max_violation <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::PhaseSpline;
    use crate::spline::HermiteSegment;

    /// A hand-built hover "solution" violating linear dynamics (no contact
    /// forces while the CoM stays aloft) must be flagged by the audit.
    #[test]
    fn audit_flags_unsupported_hover()
    {
        let model = RobotModel::default();
        let config = PlannerConfig::standing(1.0);
        let terrain = HeightField::flat(nalgebra::Vector2::new(-2.5, -2.5), 0.5, 10, 10, 0.0).unwrap();
        let feet = model.nominal_feet_base();
        let com = Vector3::new(0.0, 0.0, model.nominal_stance_depth);

        let hold = |p: Vector3<f64>| PhaseSpline::with_tags(
            vec![HermiteSegment::constant(p, 1.0)],
            vec![PhaseKind::Stance],
        );
        let solution = CentroidalSolution {
            horizon: 1.0,
            com_pos: PhaseSpline::new(vec![HermiteSegment::constant(com, 1.0)]),
            com_ang: PhaseSpline::new(vec![HermiteSegment::constant(Vector3::zeros(), 1.0)]),
            ee: std::array::from_fn(|leg| hold(com + feet[leg])),
            force: std::array::from_fn(|_| hold(Vector3::zeros())),
            report: crate::nlp::SolveReport {
                status: crate::nlp::SolveStatus::Converged,
                max_violation: 0.0,
                initial_violation: 0.0,
                outer_iterations: 0,
                inner_iterations: 0,
                wall_time_s: 0.0,
            },
        };
        let report = audit_solution(&solution, &model, &terrain, &config);
        // Gravity unopposed: linear residual is exactly 1 body weight.
        let lin = report.entry("dynamics-linear").unwrap();
        assert!((lin - 1.0).abs() < 1e-12, "got {lin}");
        assert!(!is_physically_plausible(&report, 1e-3));
    }

    /// The same standing pose with mg/4 on each foot passes every dynamics
    /// and contact check.
    #[test]
    fn audit_accepts_exact_standing_equilibrium() {
        let model = RobotModel::default();
        let config = PlannerConfig::standing(1.0);
        let terrain = HeightField::flat(nalgebra::Vector2::new(-2.5, -2.5), 0.5, 10, 10, 0.0).unwrap();
        let feet = model.nominal_feet_base();
        let com = Vector3::new(0.0, 0.0, model.nominal_stance_depth);
        let f = Vector3::new(0.0, 0.0, model.mass * config.gravity / 4.0);

        let hold = |p: Vector3<f64>| PhaseSpline::with_tags(
            vec![HermiteSegment::constant(p, 1.0)],
            vec![PhaseKind::Stance],
        );
        let solution = CentroidalSolution {
            horizon: 1.0,
            com_pos: PhaseSpline::new(vec![HermiteSegment::constant(com, 1.0)]),
            com_ang: PhaseSpline::new(vec![HermiteSegment::constant(Vector3::zeros(), 1.0)]),
            ee: std::array::from_fn(|leg| hold(com + feet[leg])),
            force: std::array::from_fn(|_| hold(f)),
            report: crate::nlp::SolveReport {
                status: crate::nlp::SolveStatus::Converged,
                max_violation: 0.0,
                initial_violation: 0.0,
                outer_iterations: 0,
                inner_iterations: 0,
                wall_time_s: 0.0,
            },
        };
        let report = audit_solution(&solution, &model, &terrain, &config);
        // The nominal stance is symmetric about the CoM: torques cancel.
        assert!(report.max_violation < 1e-12, "violation {}", report.max_violation);
        assert!((report.min_normal_force - f.z / config.f_max).abs() < 1e-12);
    }
}
