//! Augmented-Lagrangian outer loop with a projected Gauss-Newton inner solve.
//!
//! Equalities enter the merit as `lambda' c + (rho/2)|c|^2`; inequalities use
//! the Rockafellar form `(max(0, mu - rho g)^2 - mu^2) / (2 rho)`, which is
//! smooth in `g` and needs no slack variables. The inner minimizer is a
//! Levenberg-Marquardt step on the Gauss-Newton model of the merit, projected
//! onto the variable bounds with a backtracking line search.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConstraintKind, NlpError, NlpProblem, SolveOptions, SolveReport, SolveStatus};

struct BlockState {
    rows: usize,
    kind: ConstraintKind,
    /// Lagrange multipliers (lambda for equalities, mu >= 0 for inequalities).
    multipliers: DVector<f64>,
}

struct Workspace {
    residuals: Vec<DVector<f64>>,
    triplets: Vec<Vec<(usize, usize, f64)>>,
}

fn eval_all(
    problem: &NlpProblem,
    x: &DVector<f64>,
    ws: &mut Workspace,
) -> Result<(), NlpError> {
    for (i, block) in problem.blocks.iter().enumerate() {
        let out = &mut ws.residuals[i];
        block.eval(x, out.as_mut_slice());
        if out.iter().any(|v| !v.is_finite()) {
            return Err(NlpError::NonFiniteResidual { block: block.name().to_string() });
        }
    }
    Ok(())
}

fn jacobians_all(
    problem: &NlpProblem,
    x: &DVector<f64>,
    ws: &mut Workspace,
) -> Result<(), NlpError> {
    for (i, block) in problem.blocks.iter().enumerate() {
        let t = &mut ws.triplets[i];
        t.clear();
        block.jacobian(x, t);
        for &(row, col, val) in t.iter() {
            if row >= block.rows() || col >= problem.n {
                return Err(NlpError::JacobianShape {
                    block: block.name().to_string(),
                    row,
                    col,
                    rows: block.rows(),
                    n: problem.n,
                });
            }
            if !val.is_finite() {
                return Err(NlpError::NonFiniteJacobian { block: block.name().to_string() });
            }
        }
    }
    Ok(())
}

/// Augmented-Lagrangian merit value at already-evaluated residuals.
fn merit(
    problem: &NlpProblem,
    x: &DVector<f64>,
    states: &[BlockState],
    ws: &Workspace,
    rho: f64,
) -> f64 {
    let mut total = problem.objective.as_ref().map_or(0.0, |o| o.value(x));
    for (state, res) in states.iter().zip(&ws.residuals) {
        match state.kind {
            ConstraintKind::Equality => {
                for r in 0..state.rows {
                    let c = res[r];
                    total += state.multipliers[r] * c + 0.5 * rho * c * c;
                }
            }
            ConstraintKind::Inequality => {
                for r in 0..state.rows {
                    let active = (state.multipliers[r] - rho * res[r]).max(0.0);
                    total += (active * active - state.multipliers[r] * state.multipliers[r])
                        / (2.0 * rho);
                }
            }
        }
    }
    total
}

pub fn solve(
    problem: &NlpProblem,
    x0: &DVector<f64>,
    options: &SolveOptions,
) -> Result<(DVector<f64>, SolveReport), NlpError> {
    assert_eq!(x0.len(), problem.n, "initial point has wrong dimension");
    for i in 0..problem.n {
        if problem.lower[i] > problem.upper[i] {
            return Err(NlpError::CrossedBounds { index: i });
        }
    }
    let start = Instant::now();
    let mut x = x0.clone();
    problem.clamp_to_bounds(&mut x);

    let mut states = Vec::with_capacity(problem.blocks.len());
    for block in &problem.blocks {
        states.push(BlockState {
            rows: block.rows(),
            kind: block.kind(),
            multipliers: DVector::zeros(block.rows()),
        });
    }
    let mut ws = Workspace {
        residuals: problem.blocks.iter().map(|b| DVector::zeros(b.rows())).collect(),
        triplets: problem.blocks.iter().map(|_| Vec::new()).collect(),
    };
    // Shape-check the Jacobians once up front so bad blocks fail loudly.
    jacobians_all(problem, &x, &mut ws)?;

    let initial_violation = problem.max_violation(&x)?;
    let mut rho = options.penalty_init;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut prev_violation = initial_violation;
    let mut stall_count = 0usize;
    let mut total_inner = 0usize;
    let mut status = SolveStatus::IterationLimit;
    let mut outer_done = 0usize;

    'outer: for outer in 0..options.max_outer {
        outer_done = outer + 1;
        let inner_done = inner_minimize(
            problem,
            &mut x,
            &states,
            &mut ws,
            rho,
            options,
            start,
            &mut total_inner,
        )?;

        eval_all(problem, &x, &mut ws)?;
        let mut violation = 0.0f64;
        for (state, res) in states.iter().zip(&ws.residuals) {
            for r in 0..state.rows {
                let v = match state.kind {
                    ConstraintKind::Equality => res[r].abs(),
                    ConstraintKind::Inequality => (-res[r]).max(0.0),
                };
                violation = violation.max(v);
            }
        }

        if options.verbose {
            eprintln!(
                "outer {outer:3}: violation {violation:10.3e} rho {rho:9.2e} inner {inner_done}"
            );
        }
        if violation <= options.feas_tol {
            status = SolveStatus::Converged;
            break 'outer;
        }
        if start.elapsed().as_secs_f64() > options.time_budget_s {
            status = SolveStatus::TimeLimit;
            break 'outer;
        }

        // First-order multiplier updates with safeguard bounds.
        for (state, res) in states.iter_mut().zip(&ws.residuals) {
            match state.kind {
                ConstraintKind::Equality => {
                    for r in 0..state.rows {
                        state.multipliers[r] = (state.multipliers[r] + rho * res[r])
                            .clamp(-options.multiplier_bound, options.multiplier_bound);
                    }
                }
                ConstraintKind::Inequality => {
                    for r in 0..state.rows {
                        state.multipliers[r] = (state.multipliers[r] - rho * res[r])
                            .max(0.0)
                            .min(options.multiplier_bound);
                    }
                }
            }
        }

        // Penalty growth when the violation is not shrinking fast enough.
        if violation > prev_violation / options.violation_shrink {
            rho = (rho * options.penalty_growth).min(options.penalty_max);
        }
        // Deterministic stall perturbation: if the inner solver made no
        // progress at all twice in a row, nudge the iterate to escape flats.
        if inner_done == 0 && violation >= prev_violation {
            stall_count += 1;
            if stall_count >= 2 {
                for i in 0..problem.n {
                    let span = 1e-4 * (1.0 + x[i].abs());
                    x[i] = (x[i] + rng.random_range(-span..span))
                        .clamp(problem.lower[i], problem.upper[i]);
                }
                stall_count = 0;
            }
        } else {
            stall_count = 0;
        }
        prev_violation = violation;
    }

    let max_violation = problem.max_violation(&x)?;
    if status != SolveStatus::Converged && max_violation <= options.feas_tol {
        status = SolveStatus::Converged;
    }
    Ok((
        x,
        SolveReport {
            status,
            max_violation,
            initial_violation,
            outer_iterations: outer_done,
            inner_iterations: total_inner,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Minimize the augmented-Lagrangian merit at fixed multipliers and penalty.
/// Returns the number of accepted steps.
#[allow(clippy::too_many_arguments)]
fn inner_minimize(
    problem: &NlpProblem,
    x: &mut DVector<f64>,
    states: &[BlockState],
    ws: &mut Workspace,
    rho: f64,
    options: &SolveOptions,
    start: Instant,
    total_inner: &mut usize,
) -> Result<usize, NlpError> {
    let n = problem.n;
    let mut nu: f64 = 1e-6; // Levenberg-Marquardt damping
    let mut accepted = 0usize;

    for _ in 0..options.max_inner {
        if start.elapsed().as_secs_f64() > options.time_budget_s {
            break;
        }
        eval_all(problem, x, ws)?;
        jacobians_all(problem, x, ws)?;
        *total_inner += 1;

        // Gradient of the merit and Gauss-Newton Hessian of its quadratic
        // penalty part. Inequality rows only contribute where the Rockafellar
        // term is active (mu - rho g > 0).
        let mut grad = DVector::zeros(n);
        if let Some(obj) = &problem.objective {
            obj.add_gradient(x, &mut grad);
        }
        let mut hess = DMatrix::zeros(n, n);
        for ((state, res), trips) in states.iter().zip(&ws.residuals).zip(&ws.triplets) {
            // Per-row scalar multiplying J' in the gradient, and row mask for
            // the GN Hessian.
            let mut row_weight = vec![0.0f64; state.rows];
            let mut row_active = vec![false; state.rows];
            for r in 0..state.rows {
                match state.kind {
                    ConstraintKind::Equality => {
                        row_weight[r] = state.multipliers[r] + rho * res[r];
                        row_active[r] = true;
                    }
                    ConstraintKind::Inequality => {
                        let m = state.multipliers[r] - rho * res[r];
                        if m > 0.0 {
                            row_weight[r] = -m;
                            row_active[r] = true;
                        }
                    }
                }
            }
            // Group triplets by row to accumulate J' J.
            let mut row_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); state.rows];
            for &(r, c, v) in trips {
                row_entries[r].push((c, v));
                if row_active[r] {
                    grad[c] += row_weight[r] * v;
                }
            }
            for r in 0..state.rows {
                if !row_active[r] {
                    continue;
                }
                let entries = &row_entries[r];
                for &(ci, vi) in entries {
                    for &(cj, vj) in entries {
                        hess[(ci, cj)] += rho * vi * vj;
                    }
                }
            }
        }
        if let Some(obj) = &problem.objective {
            let mut obj_diag = DVector::zeros(n);
            obj.add_hessian_diag(x, &mut obj_diag);
            for i in 0..n {
                hess[(i, i)] += obj_diag[i];
            }
        }

        // Projected Newton active set: variables pinned by their bounds, or
        // pressed against one by the gradient, are frozen out of the model.
        // Otherwise the Newton step spends its length on motion the bound
        // projection then deletes, the predicted decrease never materializes
        // and the line search crawls.
        let mut active = vec![false; n];
        for i in 0..n {
            let at_lower = problem.lower[i].is_finite()
                && x[i] - problem.lower[i] <= 1e-12 * (1.0 + problem.lower[i].abs());
            let at_upper = problem.upper[i].is_finite()
                && problem.upper[i] - x[i] <= 1e-12 * (1.0 + problem.upper[i].abs());
            active[i] = (at_lower && grad[i] > 0.0)
                || (at_upper && grad[i] < 0.0)
                || problem.lower[i] == problem.upper[i];
        }
        // KKT stationarity of the subproblem: the projected gradient vanishes.
        let mut projected_grad = 0.0f64;
        for i in 0..n {
            if !active[i] {
                projected_grad = projected_grad.max(grad[i].abs());
            }
        }
        if projected_grad <= 1e-6 * (1.0 + rho) {
            break; // stationary for this subproblem
        }
        for i in 0..n {
            if !active[i] {
                continue;
            }
            grad[i] = 0.0;
            for j in 0..n {
                hess[(i, j)] = 0.0;
                hess[(j, i)] = 0.0;
            }
            hess[(i, i)] = 1.0;
        }

        let merit_now = merit(problem, x, states, ws, rho);

        // Damped Newton step with retries on an indefinite or rejected model.
        // Marquardt scaling: damp each column relative to its own curvature so
        // steep directions (phase durations) and flat ones (force rates) both
        // get sensible trust radii.
        let mut diag_scale = DVector::from_element(n, 0.0f64);
        let mut max_diag = 0.0f64;
        for i in 0..n {
            max_diag = max_diag.max(hess[(i, i)]);
        }
        let floor = (1e-8 * max_diag).max(1e-12);
        for i in 0..n {
            diag_scale[i] = hess[(i, i)].max(floor);
        }
        let mut stepped = false;
        for _ in 0..12 {
            let mut damped = hess.clone();
            for i in 0..n {
                damped[(i, i)] += nu * diag_scale[i];
            }
            let Some(chol) = damped.cholesky() else {
                nu = (nu * 10.0).max(1e-12);
                continue;
            };
            let step = chol.solve(&(-&grad));

            // Projected backtracking line search on the merit.
            let mut alpha = 1.0;
            for _ in 0..25 {
                let mut cand = &*x + &step * alpha;
                problem.clamp_to_bounds(&mut cand);
                let dir_deriv = grad.dot(&(&cand - &*x));
                let cand_merit = {
                    eval_all(problem, &cand, ws)?;
                    merit(problem, &cand, states, ws, rho)
                };
                if cand_merit <= merit_now + 1e-4 * dir_deriv.min(0.0) && cand_merit < merit_now {
                    let moved = (&cand - &*x).amax();
                    *x = cand;
                    stepped = moved > options.step_tol;
                    break;
                }
                alpha *= 0.5;
            }
            if stepped {
                nu = (nu / 3.0).max(1e-12);
                accepted += 1;
                break;
            }
            nu *= 10.0;
            if nu > 1e10 {
                break;
            }
        }
        if !stepped {
            break; // stationary for this subproblem
        }
    }
    Ok(accepted)
}
