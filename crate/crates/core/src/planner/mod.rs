//! Trajectory optimization over procedural terrain.
//!
//! The planner poses gait generation as a feasibility NLP on a single rigid
//! body: CoM position and orientation splines with fixed uniform segments,
//! per-leg end-effector and force splines structured by an alternating
//! stance/swing schedule with variable phase durations, Newton-Euler
//! dynamics enforced on a time grid, friction cones and force bounds on
//! stance, ground clearance on swing, terrain-pinned contacts, kinematic leg
//! boxes and boundary conditions. [`plan`] assembles the problem, seeds a
//! fly-trot and hands it to the augmented-Lagrangian solver; [`audit_solution`]
//! re-derives every residual from the splines alone.

mod audit;
mod blocks;
mod config;
mod context;
mod init;
mod io;
mod layout;
mod solution;

pub use audit::{audit_solution, is_physically_plausible, AuditEntry, AuditReport};
pub use blocks::build_problem;
pub use config::PlannerConfig;
pub use context::{ChannelEval, PlannerContext, Vec3Deps};
pub use init::{initialize_variables, trot_schedule};
pub use io::{
    config_from_key_values, config_to_key_values, load_planner_config, load_solution,
    parse_solution, render_solution, save_planner_config, save_solution, PlannerIoError,
};
pub use layout::{LegLayout, VarLayout};
pub use solution::CentroidalSolution;

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::heightfield::HeightField;
use crate::nlp::{self, NlpError, SolveOptions};
use crate::robot::{RobotError, RobotModel};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("bad planner configuration: {message}")]
    BadConfig { message: String },
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Nlp(#[from] NlpError),
}

/// Solve one trajectory problem.
///
/// Builds the NLP for `model` on `terrain`, seeds it with the fly-trot
/// initializer under `seed` and runs the solver. The solution is returned
/// regardless of convergence — the report carries the status — so callers
/// can filter or retry; hard errors (invalid inputs, non-finite residuals)
/// fail instead.
///
/// The solve runs in two stages. Phase durations make the sampled residuals
/// piecewise-smooth (constraint times cross phase boundaries as durations
/// move), which Gauss-Newton models badly, so the first stage holds the
/// durations at their seeded schedule — the seed satisfies the phase-sum
/// equalities exactly, and the remaining system is feasibility-complete in
/// the other variables on most terrain. Only if that stage fails do the
/// durations open up, warm-started from the best frozen iterate.
pub fn plan(
    model: &RobotModel,
    terrain: &HeightField,
    config: &PlannerConfig,
    seed: u64,
    options: &SolveOptions,
) -> Result<CentroidalSolution, PlannerError> {
    let ctx = Arc::new(PlannerContext::new(
        model.clone(),
        terrain.clone(),
        config.clone(),
    )?);
    let mut problem = build_problem(&ctx);
    let x0 = initialize_variables(&ctx, seed);
    // The problem is pure feasibility; its constraints leave a sizeable null
    // space (redundant stance forces, free spline rates), along which the
    // augmented-Lagrangian multipliers can cycle without progress. A weak
    // tether to the seed makes every inner subproblem strictly convex and
    // selects the feasible point nearest the smooth initial gait.
    problem.objective = Some(Box::new(nlp::QuadraticTether {
        reference: x0.clone(),
        weights: tether_weights(&ctx),
    }));

    let duration_vars: Vec<usize> = ctx
        .layout
        .legs
        .iter()
        .flat_map(|leg| (0..leg.n_phases).map(move |j| leg.durations + j))
        .collect();
    let freed_bounds: Vec<(usize, f64, f64)> = duration_vars
        .iter()
        .map(|&i| (i, problem.lower[i], problem.upper[i]))
        .collect();
    for &i in &duration_vars {
        problem.lower[i] = x0[i];
        problem.upper[i] = x0[i];
    }
    let (x_frozen, frozen_report) = nlp::solve(&problem, &x0, options)?;

    let (x, report) = if frozen_report.status == nlp::SolveStatus::Converged {
        (x_frozen, frozen_report)
    } else {
        for &(i, lo, hi) in &freed_bounds {
            problem.lower[i] = lo;
            problem.upper[i] = hi;
        }
        let (x_free, free_report) = nlp::solve(&problem, &x_frozen, options)?;
        let combined = nlp::SolveReport {
            status: free_report.status,
            max_violation: free_report.max_violation,
            initial_violation: frozen_report.initial_violation,
            outer_iterations: frozen_report.outer_iterations + free_report.outer_iterations,
            inner_iterations: frozen_report.inner_iterations + free_report.inner_iterations,
            wall_time_s: frozen_report.wall_time_s + free_report.wall_time_s,
        };
        (x_free, combined)
    };
    Ok(CentroidalSolution {
        horizon: config.horizon,
        com_pos: ctx.com_pos_spline(&x),
        com_ang: ctx.com_ang_spline(&x),
        ee: std::array::from_fn(|leg| ctx.ee_spline(&x, leg)),
        force: std::array::from_fn(|leg| ctx.force_spline(&x, leg)),
        report,
    })
}

/// Tether weights `w0 / scale^2` with a natural scale per variable class, so
/// one scale-unit of drift costs the same everywhere and stays far below the
/// penalty terms (which carry weights >= the initial penalty).
fn tether_weights(ctx: &PlannerContext) -> DVector<f64> {
    const W0: f64 = 1e-3;
    let layout = &ctx.layout;
    let mut w = DVector::from_element(layout.n_vars, 0.0);
    let mut set = |base: usize, n: usize, scale: f64| {
        for i in 0..n {
            w[base + i] = W0 / (scale * scale);
        }
    };
    for k in 0..=layout.n_com_segments {
        set(layout.com_pos_node(k), 3, 0.5); // metres
        set(layout.com_pos_node(k) + 3, 3, 2.0); // m/s
        set(layout.com_ang_node(k), 3, 0.5); // radians
        set(layout.com_ang_node(k) + 3, 3, 2.0); // rad/s
    }
    let f_scale = ctx.config.f_max;
    for leg in &layout.legs {
        // Durations get the stiffest tether: residual sample times are only
        // piecewise-smooth in them, so unprompted drift is pure noise.
        set(leg.durations, leg.n_phases, 0.1); // seconds
        for &p in &leg.stance_points {
            set(p, 3, 0.5);
        }
        for &node in &leg.swing_nodes {
            set(node, 3, 0.5);
            set(node + 3, 3, 2.0);
        }
        for nodes in &leg.force_nodes {
            for &node in nodes.iter().flatten() {
                set(node, 3, f_scale);
                set(node + 3, 3, 10.0 * f_scale);
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::N_LEGS;
    use crate::nlp::{check_jacobians, SolveStatus};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_terrain() -> HeightField {
        HeightField::flat(nalgebra::Vector2::new(-5.0, -5.0), 0.25, 40, 40, 0.0).unwrap()
    }

    /// Uniform slope: h rises linearly in x and y. Piecewise-linear
    /// interpolation reproduces a plane exactly, so all terrain gradients are
    /// exact and the finite-difference Jacobian checks stay meaningful.
    fn ramp_terrain() -> HeightField {
        let (rows, cols, cell) = (40usize, 40usize, 0.25f64);
        let mut heights = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                heights.push(0.08 * (c as f64 * cell) + 0.03 * (r as f64 * cell));
            }
        }
        HeightField::new(nalgebra::Vector2::new(-5.0, -5.0), cell, rows, cols, heights).unwrap()
    }

    fn test_config() -> PlannerConfig {
        PlannerConfig {
            horizon: 1.2,
            goal_displacement: 0.4,
            n_swing_phases: 1,
            n_com_segments: 4,
            ..PlannerConfig::default()
        }
    }

    /// Every constraint block's analytic Jacobian must match central finite
    /// differences at randomly perturbed points, on flat and ramp terrain,
    /// for both kinematic-box modes.
    #[test]
    fn block_jacobians_match_finite_differences() {
        for terrain in [flat_terrain(), ramp_terrain()] {
            for full_box in [false, true] {
                let mut config = test_config();
                config.full_orientation_box = full_box;
                let ctx = Arc::new(
                    PlannerContext::new(RobotModel::default(), terrain.clone(), config).unwrap(),
                );
                let problem = build_problem(&ctx);
                let mut rng = ChaCha8Rng::seed_from_u64(11);
                for trial in 0..3 {
                    let mut x = initialize_variables(&ctx, trial);
                    for v in x.iter_mut() {
                        *v += rng.random_range(-0.02..0.02);
                    }
                    // Keep durations positive after perturbation.
                    for leg in &ctx.layout.legs {
                        for j in 0..leg.n_phases {
                            x[leg.durations + j] = x[leg.durations + j].max(0.12);
                        }
                    }
                    for check in check_jacobians(&problem, &x, 1e-6, 1e-4) {
                        assert!(
                            check.passed,
                            "{} failed: rel err {:.3e} at row {} col {} (terrain {}, full_box {full_box})",
                            check.name,
                            check.max_rel_error,
                            check.worst_row,
                            check.worst_col,
                            if terrain.height_at_clamped(nalgebra::Vector2::zeros()) == 0.0 { "flat" } else { "ramp" },
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn variable_count_matches_closed_form() {
        let config = PlannerConfig::default();
        let ctx = PlannerContext::new(RobotModel::default(), flat_terrain(), config).unwrap();
        assert_eq!(ctx.n_vars(), VarLayout::expected_vars(10, 4));
        assert_eq!(ctx.n_vars(), 612);
    }

    /// A standing problem is a pure equilibrium and must converge quickly.
    #[test]
    fn standing_problem_converges() {
        let model = RobotModel::default();
        let config = PlannerConfig::standing(1.0);
        let solution = plan(&model, &flat_terrain(), &config, 0, &SolveOptions::default()).unwrap();
        assert_eq!(solution.report.status, SolveStatus::Converged);
        let report = audit_solution(&solution, &model, &flat_terrain(), &config);
        assert!(
            report.max_violation <= 1e-3,
            "audit violation {}",
            report.max_violation
        );
        // Standing on flat ground: forces stay near a quarter body weight.
        assert!(report.min_normal_force > 0.8 * (model.mass * config.gravity / 4.0) / config.f_max);
    }

    /// One short walking problem end to end: solve, then audit independently.
    #[test]
    fn short_walk_solves_and_audits() {
        let model = RobotModel::default();
        let config = PlannerConfig::short_walk();
        let mut options = SolveOptions::default();
        options.time_budget_s = 300.0;
        let solution = plan(&model, &flat_terrain(), &config, 1, &options).unwrap();
        assert_eq!(
            solution.report.status,
            SolveStatus::Converged,
            "solver stopped with violation {}",
            solution.report.max_violation
        );
        let report = audit_solution(&solution, &model, &flat_terrain(), &config);
        assert!(
            report.max_violation <= 1e-3,
            "audit violation {} (worst: {:?})",
            report.max_violation,
            report
                .entries
                .iter()
                .max_by(|a, b| a.worst.partial_cmp(&b.worst).unwrap())
                .map(|e| e.name.clone())
        );
        // Physical scans: forces pull, never push, beyond tolerance; swing
        // feet clear the ground to within a centimeter.
        assert!(report.min_normal_force >= -0.05);
        assert!(report.min_swing_clearance >= -0.01);
        // The CoM actually travels to the goal.
        let r0 = solution.com_pos.value(0.0).unwrap();
        let rt = solution.com_pos.value(config.horizon).unwrap();
        assert!((rt.x - r0.x - config.goal_displacement).abs() < 1e-3);
    }

    /// Solving the same seed twice gives bitwise-identical trajectories.
    #[test]
    fn planning_is_deterministic() {
        let model = RobotModel::default();
        let config = PlannerConfig::standing(1.0);
        let a = plan(&model, &flat_terrain(), &config, 4, &SolveOptions::default()).unwrap();
        let b = plan(&model, &flat_terrain(), &config, 4, &SolveOptions::default()).unwrap();
        let pa: Vec<f64> = a.com_pos.segments().iter().flat_map(|s| s.p0.iter().copied().collect::<Vec<_>>()).collect();
        let pb: Vec<f64> = b.com_pos.segments().iter().flat_map(|s| s.p0.iter().copied().collect::<Vec<_>>()).collect();
        assert_eq!(pa, pb);
    }

    /// The solution file round-trips through text and still audits clean.
    #[test]
    fn solution_io_preserves_audit() {
        let model = RobotModel::default();
        let config = PlannerConfig::standing(1.0);
        let solution = plan(&model, &flat_terrain(), &config, 2, &SolveOptions::default()).unwrap();
        let text = render_solution(&solution);
        let loaded = parse_solution(&text, "mem").unwrap();
        let a = audit_solution(&solution, &model, &flat_terrain(), &config);
        let b = audit_solution(&loaded, &model, &flat_terrain(), &config);
        assert_eq!(a.max_violation, b.max_violation);
    }

    /// Initialization satisfies the phase-sum equalities exactly and the
    /// duration bounds.
    #[test]
    fn initial_point_respects_schedule_constraints() {
        let config = PlannerConfig::default();
        let ctx = Arc::new(
            PlannerContext::new(RobotModel::default(), flat_terrain(), config.clone()).unwrap(),
        );
        let x = initialize_variables(&ctx, 9);
        for leg in 0..N_LEGS {
            let durations = ctx.leg_durations(&x, leg);
            let total: f64 = durations.iter().sum();
            assert!((total - config.horizon).abs() < 1e-12);
            for d in durations {
                assert!(d >= config.phase_duration_min && d <= config.phase_duration_max);
            }
        }
        // Problem bounds don't clip the initial point.
        let problem = build_problem(&ctx);
        let mut clamped = x.clone();
        problem.clamp_to_bounds(&mut clamped);
        assert_eq!(x, clamped);
    }

    /// Degenerate-direction probe: duplicate dynamics rows at knot times must
    /// not produce NaNs in the residual at the initial point.
    #[test]
    fn residuals_finite_at_initial_point() {
        let config = PlannerConfig::short_walk();
        let ctx = Arc::new(
            PlannerContext::new(RobotModel::default(), flat_terrain(), config).unwrap(),
        );
        let problem = build_problem(&ctx);
        let x = initialize_variables(&ctx, 0);
        let violation = problem.max_violation(&x).unwrap();
        assert!(violation.is_finite());
        // The seed is deliberately infeasible (noise) but not absurd.
        assert!(violation < 50.0, "initial violation {violation}");
        let x_dvec: DVector<f64> = x;
        assert!(x_dvec.iter().all(|v| v.is_finite()));
    }
}
