//! Constraint blocks of the trajectory NLP and the problem assembly.
//!
//! Dynamics and kinematic-box rows sample a fixed absolute-time grid; force
//! and clearance rows sample fixed fractions of their phase so the rows keep
//! a stable meaning while phase durations move. Every block carries an
//! analytic sparse Jacobian.

use std::sync::Arc;

use nalgebra::{DVector, Matrix3, Vector3};

use crate::math;
use crate::nlp::{ConstraintBlock, ConstraintKind, NlpProblem};
use crate::robot::{LEG_NAMES, N_LEGS};
use crate::spline::PhaseKind;

use super::context::{PlannerContext, Vec3Deps};
use super::init::trot_schedule;

/// Lever arm used to scale angular-dynamics residuals into multiples of
/// `m g L`, comparable with the body-weight scaling of the linear rows.
pub(super) const TORQUE_LEVER: f64 = 0.3;

/// Append `M * d(value)/dx` into three consecutive rows starting at `row0`.
fn add_mat_deps(
    triplets: &mut Vec<(usize, usize, f64)>,
    row0: usize,
    m: &Matrix3<f64>,
    deps: &Vec3Deps,
) {
    for &(base, w) in &deps.diag {
        for (c, col) in m.column_iter().enumerate() {
            for r in 0..3 {
                triplets.push((row0 + r, base + c, col[r] * w));
            }
        }
    }
    for &(idx, g) in &deps.dense {
        let mg = m * g;
        for r in 0..3 {
            triplets.push((row0 + r, idx, mg[r]));
        }
    }
}

/// Append `s * d(value)/dx` (scaled identity) into three consecutive rows.
fn add_scaled_deps(
    triplets: &mut Vec<(usize, usize, f64)>,
    row0: usize,
    s: f64,
    deps: &Vec3Deps,
) {
    for &(base, w) in &deps.diag {
        for c in 0..3 {
            triplets.push((row0 + c, base + c, w * s));
        }
    }
    for &(idx, g) in &deps.dense {
        for r in 0..3 {
            triplets.push((row0 + r, idx, g[r] * s));
        }
    }
}

/// Append `a . d(value)/dx` into a single row.
fn add_row_deps(
    triplets: &mut Vec<(usize, usize, f64)>,
    row: usize,
    a: &Vector3<f64>,
    deps: &Vec3Deps,
) {
    for &(base, w) in &deps.diag {
        for c in 0..3 {
            triplets.push((row, base + c, a[c] * w));
        }
    }
    for &(idx, g) in &deps.dense {
        triplets.push((row, idx, a.dot(&g)));
    }
}

/// Newton residuals in units of body weight:
/// `(m (r_ddot - g) - sum_i f_i) / (m g) = 0` on the dynamics time grid.
struct DynamicsLinear {
    ctx: Arc<PlannerContext>,
    /// `(time, left_limit)`; interior CoM knots appear once per side since
    /// the spline acceleration is discontinuous there.
    times: Vec<(f64, bool)>,
}

impl ConstraintBlock for DynamicsLinear {
    fn name(&self) -> &str {
        "dynamics-linear"
    }

    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }

    fn rows(&self) -> usize {
        3 * self.times.len()
    }

    fn eval(&self, x: &DVector<f64>, out: &mut [f64]) {
        let g = self.ctx.config.gravity;
        let m = self.ctx.model.mass;
        let g_vec = Vector3::new(0.0, 0.0, -g);
        for (i, &(t, left)) in self.times.iter().enumerate() {
            let acc = self.ctx.com_pos_at(x, t, left).acc.value;
            let mut f_sum = Vector3::zeros();
            for leg in 0..N_LEGS {
                f_sum += self.ctx.force_world(x, leg, t).value;
            }
            let res = (acc - g_vec) / g - f_sum / (m * g);
            out[3 * i..3 * i + 3].copy_from_slice(res.as_slice());
        }
    }

    fn jacobian(&self, x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>) {
        let g = self.ctx.config.gravity;
        let m = self.ctx.model.mass;
        for (i, &(t, left)) in self.times.iter().enumerate() {
            let row0 = 3 * i;
            add_scaled_deps(triplets, row0, 1.0 / g, &self.ctx.com_pos_at(x, t, left).acc);
            for leg in 0..N_LEGS {
                add_scaled_deps(triplets, row0, -1.0 / (m * g), &self.ctx.force_world(x, leg, t));
            }
        }
    }
}

/// Euler residuals in units of `m g L`:
/// `(I_w wdot + w x I_w w - sum_i (p_i - r) x f_i) / (m g L) = 0`.
struct DynamicsAngular {
    ctx: Arc<PlannerContext>,
    /// Same convention as [`DynamicsLinear::times`].
    times: Vec<(f64, bool)>,
}

impl DynamicsAngular {
    fn scale(&self) -> f64 {
        self.ctx.model.mass * self.ctx.config.gravity * TORQUE_LEVER
    }
}

impl ConstraintBlock for DynamicsAngular {
    fn name(&self) -> &str {
        "dynamics-angular"
    }

    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }

    fn rows(&self) -> usize {
        3 * self.times.len()
    }

    fn eval(&self, x: &DVector<f64>, out: &mut [f64]) {
        let inv = 1.0 / self.scale();
        for (i, &(t, left)) in self.times.iter().enumerate() {
            let ang = self.ctx.com_ang_at(x, t, left);
            let r = self.ctx.com_pos(x, t).value.value;
            let body = angular_momentum_rate(&self.ctx, &ang.value.value, &ang.vel.value, &ang.acc.value);
            let mut torque = Vector3::zeros();
            for leg in 0..N_LEGS {
                let p = self.ctx.ee_world(x, leg, t).value;
                let f = self.ctx.force_world(x, leg, t).value;
                torque += (p - r).cross(&f);
            }
            let res = (body - torque) * inv;
            out[3 * i..3 * i + 3].copy_from_slice(res.as_slice());
        }
    }

    fn jacobian(&self, x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>) {
        let inv = 1.0 / self.scale();
        for (i, &(t, left)) in self.times.iter().enumerate() {
            let row0 = 3 * i;
            let ang = self.ctx.com_ang_at(x, t, left);
            let com = self.ctx.com_pos(x, t);
            let r = com.value.value;
            let (j_theta, j_theta_dot, j_theta_ddot) =
                angular_momentum_rate_partials(&self.ctx, &ang.value.value, &ang.vel.value, &ang.acc.value);
            add_mat_deps(triplets, row0, &(j_theta * inv), &ang.value);
            add_mat_deps(triplets, row0, &(j_theta_dot * inv), &ang.vel);
            add_mat_deps(triplets, row0, &(j_theta_ddot * inv), &ang.acc);

            let mut f_sum = Vector3::zeros();
            for leg in 0..N_LEGS {
                let p = self.ctx.ee_world(x, leg, t);
                let f = self.ctx.force_world(x, leg, t);
                // d/dp [-(p - r) x f] = skew(f); d/df [...] = -skew(p - r).
                add_mat_deps(triplets, row0, &(math::skew(&f.value) * inv), &p);
                add_mat_deps(triplets, row0, &(-math::skew(&(p.value - r)) * inv), &f);
                f_sum += f.value;
            }
            // d/dr [-(p - r) x f] summed over legs.
            add_mat_deps(triplets, row0, &(-math::skew(&f_sum) * inv), &com.value);
        }
    }
}

/// `I_w wdot + w x I_w w` from Euler angles and their first two rates.
fn angular_momentum_rate(
    ctx: &PlannerContext,
    theta: &Vector3<f64>,
    theta_dot: &Vector3<f64>,
    theta_ddot: &Vector3<f64>,
) -> Vector3<f64> {
    let rot = math::rotation(theta);
    let i_w = rot * ctx.model.body_inertia * rot.transpose();
    let c = math::euler_rate_map(theta);
    let dc = math::euler_rate_map_partials(theta);
    let w = c * theta_dot;
    let c_dot = dc[0] * theta_dot[0] + dc[1] * theta_dot[1] + dc[2] * theta_dot[2];
    let w_dot = c * theta_ddot + c_dot * theta_dot;
    i_w * w_dot + w.cross(&(i_w * w))
}

/// Partials of [`angular_momentum_rate`] with respect to the Euler angles,
/// rates and second rates (one 3x3 Jacobian each).
fn angular_momentum_rate_partials(
    ctx: &PlannerContext,
    theta: &Vector3<f64>,
    theta_dot: &Vector3<f64>,
    theta_ddot: &Vector3<f64>,
) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let inertia = ctx.model.body_inertia;
    let rot = math::rotation(theta);
    let d_rot = math::rotation_partials(theta);
    let i_w = rot * inertia * rot.transpose();
    let c = math::euler_rate_map(theta);
    let dc = math::euler_rate_map_partials(theta);
    let ddc = math::euler_rate_map_second_partials(theta);
    let w = c * theta_dot;
    let c_dot = dc[0] * theta_dot[0] + dc[1] * theta_dot[1] + dc[2] * theta_dot[2];
    let w_dot = c * theta_ddot + c_dot * theta_dot;

    let mut j_theta = Matrix3::zeros();
    let mut j_theta_dot = Matrix3::zeros();
    let mut j_theta_ddot = Matrix3::zeros();
    for k in 0..3 {
        let di_w = d_rot[k] * inertia * rot.transpose() + rot * inertia * d_rot[k].transpose();
        let dw = dc[k] * theta_dot;
        let dc_dot = ddc[0][k] * theta_dot[0] + ddc[1][k] * theta_dot[1] + ddc[2][k] * theta_dot[2];
        let dw_dot = dc[k] * theta_ddot + dc_dot * theta_dot;
        let col = di_w * w_dot
            + i_w * dw_dot
            + dw.cross(&(i_w * w))
            + w.cross(&(di_w * w + i_w * dw));
        j_theta.set_column(k, &col);

        // Rates: w and w_dot are the only theta_dot-dependent factors.
        let dw = c.column(k).into_owned();
        let dw_dot = dc[k] * theta_dot + c_dot.column(k).into_owned();
        let col = i_w * dw_dot + dw.cross(&(i_w * w)) + w.cross(&(i_w * dw));
        j_theta_dot.set_column(k, &col);

        j_theta_ddot.set_column(k, &(i_w * c.column(k).into_owned()));
    }
    (j_theta, j_theta_dot, j_theta_ddot)
}

/// Friction-cone and force-bound inequalities for one leg, in units of
/// `f_max`, sampled at fixed fractions of each stance phase (Hermite nodes
/// plus a dense grid).
struct ForceCone {
    ctx: Arc<PlannerContext>,
    leg: usize,
    name: String,
    /// `(phase index, stance index, fraction)` per sample.
    samples: Vec<(usize, usize, f64)>,
}

impl ForceCone {
    /// Contact frame at the stance point: terrain normal plus two tangents
    /// (world x/y projected onto the contact plane). The terrain normal is
    /// constant within a triangle, so its dependence on the contact point is
    /// dropped from the Jacobian.
    fn contact_frame(&self, x: &DVector<f64>, stance: usize) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let base = self.ctx.layout.legs[self.leg].stance_points[stance];
        let n = self
            .ctx
            .terrain
            .sample_at_clamped(nalgebra::Vector2::new(x[base], x[base + 1]))
            .normal;
        let mut t1 = Vector3::x() - n * n.x;
        if t1.norm() < 1e-9 {
            t1 = Vector3::y() - n * n.y;
        }
        let t1 = t1.normalize();
        let t2 = n.cross(&t1);
        (n, t1, t2)
    }

    fn row_axes(&self, n: &Vector3<f64>, t1: &Vector3<f64>, t2: &Vector3<f64>) -> [Vector3<f64>; 6] {
        let mu = self.ctx.model.friction_mu;
        [
            *n,
            -*n,
            n * mu - t1,
            n * mu + t1,
            n * mu - t2,
            n * mu + t2,
        ]
    }
}

impl ConstraintBlock for ForceCone {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Inequality
    }

    fn rows(&self) -> usize {
        6 * self.samples.len()
    }

    fn eval(&self, x: &DVector<f64>, out: &mut [f64]) {
        let f_max = self.ctx.config.f_max;
        for (i, &(phase, stance, frac)) in self.samples.iter().enumerate() {
            let f = self.ctx.force_local(x, self.leg, phase, frac).value;
            let (n, t1, t2) = self.contact_frame(x, stance);
            let axes = self.row_axes(&n, &t1, &t2);
            for (r, axis) in axes.iter().enumerate() {
                let offset = if r == 1 { 1.0 } else { 0.0 };
                out[6 * i + r] = offset + axis.dot(&f) / f_max;
            }
        }
    }

    fn jacobian(&self, x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>) {
        let f_max = self.ctx.config.f_max;
        for (i, &(phase, stance, frac)) in self.samples.iter().enumerate() {
            let f = self.ctx.force_local(x, self.leg, phase, frac);
            let (n, t1, t2) = self.contact_frame(x, stance);
            let axes = self.row_axes(&n, &t1, &t2);
            for (r, axis) in axes.iter().enumerate() {
                add_row_deps(triplets, 6 * i + r, &(axis / f_max), &f);
            }
        }
    }
}

/// Ground clearance `p_z - h(p_xy) >= 0` for one leg, sampled at fixed
/// fractions of each swing phase.
struct SwingClearance {
    ctx: Arc<PlannerContext>,
    leg: usize,
    name: String,
    /// `(phase index, fraction)` per sample.
    samples: Vec<(usize, f64)>,
}

impl ConstraintBlock for SwingClearance {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Inequality
    }

    fn rows(&self) -> usize {
        self.samples.len()
    }

    fn eval(&self, x: &DVector<f64>, out: &mut [f64]) {
        for (i, &(phase, frac)) in self.samples.iter().enumerate() {
            let p = self.ctx.ee_local(x, self.leg, phase, frac).value;
            let h = self.ctx.terrain.sample_at_clamped(nalgebra::Vector2::new(p.x, p.y)).height;
            out[i] = p.z - h;
        }
    }

    fn jacobian(&self, x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>) {
        for (i, &(phase, frac)) in self.samples.iter().enumerate() {
            let p = self.ctx.ee_local(x, self.leg, phase, frac);
            let grad = self
                .ctx
                .terrain
                .sample_at_clamped(nalgebra::Vector2::new(p.value.x, p.value.y))
                .gradient;
            let a = Vector3::new(-grad.x, -grad.y, 1.0);
            add_row_deps(triplets, i, &a, &p);
        }
    }
}

/// Stance contacts pinned onto the terrain surface: `P_z - h(P_xy) = 0`.
struct StancePin {
    ctx: Arc<PlannerContext>,
    leg: usize,
    name: String,
}

impl ConstraintBlock for StancePin {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }

    fn rows(&self) -> usize {
        self.ctx.layout.legs[self.leg].n_stance()
    }

    fn eval(&self, x: &DVector<f64>, out: &mut [f64]) {
        for (s, &base) in self.ctx.layout.legs[self.leg].stance_points.iter().enumerate() {
            let q = nalgebra::Vector2::new(x[base], x[base + 1]);
            out[s] = x[base + 2] - self.ctx.terrain.sample_at_clamped(q).height;
        }
    }

    fn jacobian(&self, x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>) {
        for (s, &base) in self.ctx.layout.legs[self.leg].stance_points.iter().enumerate() {
            let q = nalgebra::Vector2::new(x[base], x[base + 1]);
            let grad = self.ctx.terrain.sample_at_clamped(q).gradient;
            triplets.push((s, base, -grad.x));
            triplets.push((s, base + 1, -grad.y));
            triplets.push((s, base + 2, 1.0));
        }
    }
}

/// End-effector positions confined to a box around the leg's nominal
/// stance, expressed in the base frame (yaw-only by default), sampled on the
/// dynamics time grid: `lo <= R^T (p - r) <= hi`.
struct KinematicBox {
    ctx: Arc<PlannerContext>,
    leg: usize,
    name: String,
    times: Vec<f64>,
}

impl KinematicBox {
    fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let c = self.ctx.model.kinematic_box_centers[self.leg];
        let e = self.ctx.model.kinematic_box_half_extents[self.leg];
        (c - e, c + e)
    }
}

impl ConstraintBlock for KinematicBox {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Inequality
    }

    fn rows(&self) -> usize {
        6 * self.times.len()
    }

    fn eval(&self, x: &DVector<f64>, out: &mut [f64]) {
        let (lo, hi) = self.bounds();
        for (i, &t) in self.times.iter().enumerate() {
            let p = self.ctx.ee_world(x, self.leg, t).value;
            let r = self.ctx.com_pos(x, t).value.value;
            let theta = self.ctx.com_ang(x, t).value.value;
            let rot = if self.ctx.config.full_orientation_box {
                math::rotation(&theta)
            } else {
                math::yaw_rotation(theta.z)
            };
            let rel = rot.transpose() * (p - r);
            for c in 0..3 {
                out[6 * i + c] = rel[c] - lo[c];
                out[6 * i + 3 + c] = hi[c] - rel[c];
            }
        }
    }

    fn jacobian(&self, x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>) {
        for (i, &t) in self.times.iter().enumerate() {
            let row0 = 6 * i;
            let p = self.ctx.ee_world(x, self.leg, t);
            let com = self.ctx.com_pos(x, t);
            let ang = self.ctx.com_ang(x, t);
            let theta = ang.value.value;
            let d = p.value - com.value.value;

            let (rot_t, j_theta) = if self.ctx.config.full_orientation_box {
                let rot = math::rotation(&theta);
                let d_rot = math::rotation_partials(&theta);
                let mut j = Matrix3::zeros();
                for k in 0..3 {
                    j.set_column(k, &(d_rot[k].transpose() * d));
                }
                (rot.transpose(), j)
            } else {
                let mut j = Matrix3::zeros();
                j.set_column(2, &(math::yaw_rotation_deriv(theta.z).transpose() * d));
                (math::yaw_rotation(theta.z).transpose(), j)
            };

            // Lower rows: +d(rel)/dx; upper rows: -d(rel)/dx.
            add_mat_deps(triplets, row0, &rot_t, &p);
            add_mat_deps(triplets, row0, &(-rot_t), &com.value);
            add_mat_deps(triplets, row0, &j_theta, &ang.value);
            add_mat_deps(triplets, row0 + 3, &(-rot_t), &p);
            add_mat_deps(triplets, row0 + 3, &rot_t, &com.value);
            add_mat_deps(triplets, row0 + 3, &(-j_theta), &ang.value);
        }
    }
}

/// Boundary conditions as direct variable pins: initial CoM state and
/// orientation state, initial contact xy positions at the nominal stance,
/// final CoM position at the goal and zero final velocities.
struct Boundary {
    pins: Vec<(usize, f64)>,
}

impl ConstraintBlock for Boundary {
    fn name(&self) -> &str {
        "boundary"
    }

    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }

    fn rows(&self) -> usize {
        self.pins.len()
    }

    fn eval(&self, x: &DVector<f64>, out: &mut [f64]) {
        for (i, &(var, target)) in self.pins.iter().enumerate() {
            out[i] = x[var] - target;
        }
    }

    fn jacobian(&self, _x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>) {
        for (i, &(var, _)) in self.pins.iter().enumerate() {
            triplets.push((i, var, 1.0));
        }
    }
}

/// Phase durations of one leg must sum to the horizon.
struct PhaseSum {
    ctx: Arc<PlannerContext>,
    leg: usize,
    name: String,
}

impl ConstraintBlock for PhaseSum {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> ConstraintKind {
        ConstraintKind::Equality
    }

    fn rows(&self) -> usize {
        1
    }

    fn eval(&self, x: &DVector<f64>, out: &mut [f64]) {
        let l = &self.ctx.layout.legs[self.leg];
        let total: f64 = (0..l.n_phases).map(|j| x[l.durations + j]).sum();
        out[0] = total - self.ctx.config.horizon;
    }

    fn jacobian(&self, _x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>) {
        let l = &self.ctx.layout.legs[self.leg];
        for j in 0..l.n_phases {
            triplets.push((0, l.durations + j, 1.0));
        }
    }
}

/// Absolute times `0, dt, 2 dt, ..., T` (last point clamped to `T`).
pub(super) fn time_grid(horizon: f64, dt: f64) -> Vec<f64> {
    let n = (horizon / dt - 1e-9).ceil() as usize;
    (0..=n).map(|k| (k as f64 * dt).min(horizon)).collect()
}

/// Dynamics sample times with knot sides. Grid points landing on an interior
/// CoM knot are emitted twice, once per acceleration limit.
fn dynamics_grid(horizon: f64, dt: f64, n_com_segments: usize) -> Vec<(f64, bool)> {
    let seg_dur = horizon / n_com_segments as f64;
    let mut out = Vec::new();
    for t in time_grid(horizon, dt) {
        let k = (t / seg_dur).round();
        let interior_knot = (t - k * seg_dur).abs() < 1e-9 && k >= 1.0 && k as usize <= n_com_segments - 1;
        if interior_knot {
            out.push((t, true));
        }
        out.push((t, false));
    }
    out
}

/// Fractions `0, dt/d, 2 dt/d, ..., 1` of a phase of duration `d`, merged
/// with mandatory fractions (Hermite node positions), deduplicated.
fn phase_fractions(duration: f64, dt: f64, mandatory: &[f64]) -> Vec<f64> {
    let n = (duration / dt - 1e-9).ceil().max(1.0) as usize;
    let mut fracs: Vec<f64> = (0..=n).map(|k| (k as f64 / n as f64).min(1.0)).collect();
    fracs.extend_from_slice(mandatory);
    fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    fracs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    fracs
}

/// Assemble the feasibility NLP: duration bounds plus all constraint blocks.
///
/// Per-phase sample counts are fixed from the undisturbed gait schedule so
/// the problem dimensions do not change as durations move during the solve.
pub fn build_problem(ctx: &Arc<PlannerContext>) -> NlpProblem {
    let config = &ctx.config;
    let mut problem = NlpProblem::new(ctx.n_vars());

    for leg in 0..N_LEGS {
        let l = &ctx.layout.legs[leg];
        for j in 0..l.n_phases {
            problem.set_bounds(l.durations + j, config.phase_duration_min, config.phase_duration_max);
        }
    }

    let dyn_times = dynamics_grid(config.horizon, config.dynamics_dt, config.n_com_segments);
    problem.add_block(Box::new(DynamicsLinear {
        ctx: Arc::clone(ctx),
        times: dyn_times.clone(),
    }));
    problem.add_block(Box::new(DynamicsAngular {
        ctx: Arc::clone(ctx),
        times: dyn_times.clone(),
    }));

    for leg in 0..N_LEGS {
        let l = &ctx.layout.legs[leg];
        let schedule = trot_schedule(config, leg);

        let mut force_samples = Vec::new();
        let mut swing_samples = Vec::new();
        for phase in 0..l.n_phases {
            if l.phase_kind(phase) == PhaseKind::Stance {
                let stance = l.stance_index(phase);
                for frac in phase_fractions(
                    schedule[phase],
                    config.force_constraint_dt,
                    &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
                ) {
                    force_samples.push((phase, stance, frac));
                }
            } else {
                for frac in phase_fractions(schedule[phase], config.swing_constraint_dt, &[0.5]) {
                    swing_samples.push((phase, frac));
                }
            }
        }

        problem.add_block(Box::new(ForceCone {
            ctx: Arc::clone(ctx),
            leg,
            name: format!("force-cone[{}]", LEG_NAMES[leg]),
            samples: force_samples,
        }));
        if !swing_samples.is_empty() {
            problem.add_block(Box::new(SwingClearance {
                ctx: Arc::clone(ctx),
                leg,
                name: format!("swing-clearance[{}]", LEG_NAMES[leg]),
                samples: swing_samples,
            }));
        }
        problem.add_block(Box::new(StancePin {
            ctx: Arc::clone(ctx),
            leg,
            name: format!("stance-pin[{}]", LEG_NAMES[leg]),
        }));
        problem.add_block(Box::new(KinematicBox {
            ctx: Arc::clone(ctx),
            leg,
            name: format!("kinematic-box[{}]", LEG_NAMES[leg]),
            times: time_grid(config.horizon, config.dynamics_dt),
        }));
        problem.add_block(Box::new(PhaseSum {
            ctx: Arc::clone(ctx),
            leg,
            name: format!("phase-sum[{}]", LEG_NAMES[leg]),
        }));
    }

    problem.add_block(Box::new(Boundary {
        pins: boundary_pins(ctx),
    }));
    problem
}

/// Variable pins of the boundary block. The start CoM sits at the nominal
/// stance height over the terrain; the goal repeats it `goal_displacement`
/// ahead, following any terrain height change.
pub(super) fn boundary_pins(ctx: &PlannerContext) -> Vec<(usize, f64)> {
    let config = &ctx.config;
    let layout = &ctx.layout;
    let start = start_com(ctx);
    let goal = goal_com(ctx);

    let mut pins = Vec::new();
    let mut pin_vec3 = |base: usize, v: Vector3<f64>| {
        for c in 0..3 {
            pins.push((base + c, v[c]));
        }
    };

    let last = layout.n_com_segments;
    pin_vec3(layout.com_pos_node(0), start);
    pin_vec3(layout.com_pos_node(0) + 3, Vector3::zeros());
    pin_vec3(layout.com_ang_node(0), Vector3::zeros());
    pin_vec3(layout.com_ang_node(0) + 3, Vector3::zeros());
    pin_vec3(layout.com_pos_node(last), goal);
    pin_vec3(layout.com_pos_node(last) + 3, Vector3::zeros());
    pin_vec3(layout.com_ang_node(last) + 3, Vector3::zeros());

    for (leg, foot) in ctx.model.nominal_feet_base().iter().enumerate() {
        let base = layout.legs[leg].stance_points[0];
        pins.push((base, config.start_xy.x + foot.x));
        pins.push((base + 1, config.start_xy.y + foot.y));
    }
    pins
}

pub(super) fn start_com(ctx: &PlannerContext) -> Vector3<f64> {
    let xy = ctx.config.start_xy;
    let h = ctx.terrain.height_at_clamped(xy);
    Vector3::new(xy.x, xy.y, h + ctx.model.nominal_stance_depth)
}

pub(super) fn goal_com(ctx: &PlannerContext) -> Vector3<f64> {
    let xy = ctx.config.start_xy + nalgebra::Vector2::new(ctx.config.goal_displacement, 0.0);
    let h = ctx.terrain.height_at_clamped(xy);
    Vector3::new(xy.x, xy.y, h + ctx.model.nominal_stance_depth)
}
