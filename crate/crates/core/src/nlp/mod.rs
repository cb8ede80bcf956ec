//! Generic nonlinear program container and augmented-Lagrangian solver.
//!
//! A problem is a flat variable vector with box bounds plus a list of
//! constraint blocks, each providing residuals and an analytic sparse
//! Jacobian. The objective defaults to constant zero — the planner problems
//! are pure feasibility programs — but a scalar objective can be attached.

mod benchmarks;
mod check;
mod solver;

pub use benchmarks::{benchmark_problems, run_benchmarks, BenchmarkOutcome};
pub use check::{check_jacobians, corrupt_block_jacobian, JacobianCheck};
pub use solver::solve;

use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Residual must equal zero.
    Equality,
    /// Residual must be `>= 0`.
    Inequality,
}

/// One group of related constraint rows with an analytic Jacobian.
pub trait ConstraintBlock: Send + Sync {
    fn name(&self) -> &str;
    fn kind(&self) -> ConstraintKind;
    fn rows(&self) -> usize;
    /// Write the residual into `out` (length `rows()`).
    fn eval(&self, x: &DVector<f64>, out: &mut [f64]);
    /// Append Jacobian triplets `(row_in_block, variable index, value)`.
    /// Rows not mentioned are zero.
    fn jacobian(&self, x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>);
}

/// Optional scalar objective; the default problem has none (constant zero).
pub trait Objective: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    /// Add the gradient into `grad`.
    fn add_gradient(&self, x: &DVector<f64>, grad: &mut DVector<f64>);
    /// Add the Hessian diagonal into `diag` (exact for separable objectives).
    /// The inner solver folds this into its quadratic model.
    fn add_hessian_diag(&self, _x: &DVector<f64>, _diag: &mut DVector<f64>) {}
}

/// Weak separable pull toward a reference point:
/// `0.5 sum_i w_i (x_i - ref_i)^2`.
///
/// Feasibility problems whose constraints leave large null spaces (free
/// spline rates, redundant contact forces) give the merit long flat valleys;
/// a tether makes the inner model strictly convex and picks the solution
/// nearest the seed. Weights should be tiny relative to the penalty terms so
/// feasibility always wins.
pub struct QuadraticTether {
    pub reference: DVector<f64>,
    pub weights: DVector<f64>,
}

impl Objective for QuadraticTether {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for i in 0..x.len() {
            let d = x[i] - self.reference[i];
            total += 0.5 * self.weights[i] * d * d;
        }
        total
    }

    fn add_gradient(&self, x: &DVector<f64>, grad: &mut DVector<f64>) {
        for i in 0..x.len() {
            grad[i] += self.weights[i] * (x[i] - self.reference[i]);
        }
    }

    fn add_hessian_diag(&self, _x: &DVector<f64>, diag: &mut DVector<f64>) {
        for i in 0..diag.len() {
            diag[i] += self.weights[i];
        }
    }
}

pub struct NlpProblem {
    pub n: usize,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub blocks: Vec<Box<dyn ConstraintBlock>>,
    pub objective: Option<Box<dyn Objective>>,
}

impl NlpProblem {
    /// Unbounded problem with `n` variables and no blocks yet.
    pub fn new(n: usize) -> Self {
        NlpProblem {
            n,
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
            blocks: Vec::new(),
            objective: None,
        }
    }

    pub fn set_bounds(&mut self, index: usize, lower: f64, upper: f64) {
        assert!(lower <= upper, "bounds crossed at variable {index}");
        self.lower[index] = lower;
        self.upper[index] = upper;
    }

    pub fn add_block(&mut self, block: Box<dyn ConstraintBlock>) {
        self.blocks.push(block);
    }

    pub fn total_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.rows()).sum()
    }

    pub fn clamp_to_bounds(&self, x: &mut DVector<f64>) {
        for i in 0..self.n {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Max violation over all blocks: `|c|` for equalities, `max(0, -g)` for
    /// inequalities.
    pub fn max_violation(&self, x: &DVector<f64>) -> Result<f64, NlpError> {
        let mut worst = 0.0f64;
        let mut buf = Vec::new();
        for block in &self.blocks {
            buf.resize(block.rows(), 0.0);
            block.eval(x, &mut buf);
            for &r in buf.iter() {
                if !r.is_finite() {
                    return Err(NlpError::NonFiniteResidual { block: block.name().to_string() });
                }
                let v = match block.kind() {
                    ConstraintKind::Equality => r.abs(),
                    ConstraintKind::Inequality => (-r).max(0.0),
                };
                worst = worst.max(v);
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Error)]
pub enum NlpError {
    #[error("non-finite residual in constraint block {block:?}")]
    NonFiniteResidual { block: String },
    #[error("non-finite Jacobian entry in constraint block {block:?}")]
    NonFiniteJacobian { block: String },
    #[error("block {block:?} produced triplet ({row}, {col}) outside {rows} rows x {n} vars")]
    JacobianShape { block: String, row: usize, col: usize, rows: usize, n: usize },
    #[error("problem has crossed bounds at variable {index}")]
    CrossedBounds { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub max_violation: f64,
    pub initial_violation: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub wall_time_s: f64,
}

/// Solver options; defaults suit desk-scale problems.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Converged when the max constraint violation drops below this.
    pub feas_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub time_budget_s: f64,
    /// Initial quadratic penalty weight.
    pub penalty_init: f64,
    /// Penalty multiplier applied when the violation fails to shrink enough.
    pub penalty_growth: f64,
    /// Cap on the quadratic penalty weight. Residuals are normalized to order
    /// one, so pushing far past this trades multiplier progress for
    /// floating-point noise in the merit.
    pub penalty_max: f64,
    /// Required violation shrink factor between outer iterations.
    pub violation_shrink: f64,
    /// Safeguard bound on Lagrange multiplier magnitudes.
    pub multiplier_bound: f64,
    /// Inner solve stops when the projected step is below this.
    pub step_tol: f64,
    /// Seed for the deterministic stall perturbation.
    pub seed: u64,
    /// Print one progress line per outer iteration to stderr.
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-4,
            max_outer: 40,
            max_inner: 60,
            time_budget_s: 60.0,
            penalty_init: 10.0,
            penalty_growth: 2.0,
            penalty_max: 1e5,
            violation_shrink: 4.0,
            multiplier_bound: 1e6,
            step_tol: 1e-10,
            seed: 0,
            verbose: false,
        }
    }
}

/// Convenience closure-backed block used by tests, benchmarks and small
/// problems.
pub struct FnBlock {
    pub name: String,
    pub kind: ConstraintKind,
    pub rows: usize,
    #[allow(clippy::type_complexity)]
    pub f: Box<dyn Fn(&DVector<f64>, &mut [f64]) + Send + Sync>,
    #[allow(clippy::type_complexity)]
    pub jac: Box<dyn Fn(&DVector<f64>, &mut Vec<(usize, usize, f64)>) + Send + Sync>,
}

impl ConstraintBlock for FnBlock {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> ConstraintKind {
        self.kind
    }

    fn rows(&self) -> usize {
        self.rows
    }

    fn eval(&self, x: &DVector<f64>, out: &mut [f64]) {
        (self.f)(x, out)
    }

    fn jacobian(&self, x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>) {
        (self.jac)(x, triplets)
    }
}
