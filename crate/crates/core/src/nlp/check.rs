//! Finite-difference verification of analytic constraint Jacobians.

use nalgebra::{DMatrix, DVector};

use super::{ConstraintBlock, ConstraintKind, NlpProblem};

/// Result of checking one block.
#[derive(Debug, Clone)]
pub struct JacobianCheck {
    pub name: String,
    pub rows: usize,
    pub max_rel_error: f64,
    pub worst_row: usize,
    pub worst_col: usize,
    pub passed: bool,
}

/// Compare every block's analytic Jacobian against central finite
/// differences at `x`. Relative error per entry is
/// `|fd - analytic| / max(1, |fd|, |analytic|)`.
pub fn check_jacobians(
    problem: &NlpProblem,
    x: &DVector<f64>,
    step: f64,
    rel_tol: f64,
) -> Vec<JacobianCheck> {
    let n = problem.n;
    let mut results = Vec::with_capacity(problem.blocks.len());
    for block in &problem.blocks {
        let rows = block.rows();
        let mut analytic: DMatrix<f64> = DMatrix::zeros(rows, n);
        let mut triplets = Vec::new();
        block.jacobian(x, &mut triplets);
        for (r, c, v) in triplets {
            analytic[(r, c)] += v;
        }

        let mut fd: DMatrix<f64> = DMatrix::zeros(rows, n);
        let mut plus = vec![0.0; rows];
        let mut minus = vec![0.0; rows];
        let mut xp = x.clone();
        for j in 0..n {
            let h = step * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            block.eval(&xp, &mut plus);
            xp[j] = x[j] - h;
            block.eval(&xp, &mut minus);
            xp[j] = x[j];
            for r in 0..rows {
                fd[(r, j)] = (plus[r] - minus[r]) / (2.0 * h);
            }
        }

        let mut worst = 0.0;
        let mut worst_row = 0;
        let mut worst_col = 0;
        for r in 0..rows {
            for c in 0..n {
                let a = analytic[(r, c)];
                let f = fd[(r, c)];
                let err = (a - f).abs() / f.abs().max(a.abs()).max(1.0);
                if err > worst {
                    worst = err;
                    worst_row = r;
                    worst_col = c;
                }
            }
        }
        results.push(JacobianCheck {
            name: block.name().to_string(),
            rows,
            max_rel_error: worst,
            worst_row,
            worst_col,
            passed: worst <= rel_tol,
        });
    }
    results
}

/// Wrap a block so one Jacobian entry is off by `delta` — a deliberate fault
/// for validating that the checker catches broken derivatives.
pub fn corrupt_block_jacobian(
    inner: Box<dyn ConstraintBlock>,
    row: usize,
    col: usize,
    delta: f64,
) -> Box<dyn ConstraintBlock> {
    Box::new(CorruptedBlock { inner, row, col, delta })
}

struct CorruptedBlock {
    inner: Box<dyn ConstraintBlock>,
    row: usize,
    col: usize,
    delta: f64,
}

impl ConstraintBlock for CorruptedBlock {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn kind(&self) -> ConstraintKind {
        self.inner.kind()
    }

    fn rows(&self) -> usize {
        self.inner.rows()
    }

    fn eval(&self, x: &DVector<f64>, out: &mut [f64]) {
        self.inner.eval(x, out)
    }

    fn jacobian(&self, x: &DVector<f64>, triplets: &mut Vec<(usize, usize, f64)>) {
        self.inner.jacobian(x, triplets);
        triplets.push((self.row, self.col, self.delta));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::FnBlock;

    fn linear_problem() -> NlpProblem {
        let mut p = NlpProblem::new(2);
        p.add_block(Box::new(FnBlock {
            name: "linear".into(),
            kind: ConstraintKind::Equality,
            rows: 2,
            f: Box::new(|x, out| {
                out[0] = 2.0 * x[0] - x[1] + 1.0;
                out[1] = 0.5 * x[1];
            }),
            jac: Box::new(|_, t| {
                t.extend_from_slice(&[(0, 0, 2.0), (0, 1, -1.0), (1, 1, 0.5)]);
            }),
        }));
        p
    }

    fn quadratic_problem() -> NlpProblem {
        let mut p = NlpProblem::new(2);
        p.add_block(Box::new(FnBlock {
            name: "quadratic".into(),
            kind: ConstraintKind::Equality,
            rows: 1,
            f: Box::new(|x, out| out[0] = x[0] * x[0] + 3.0 * x[0] * x[1]),
            jac: Box::new(|x, t| {
                t.push((0, 0, 2.0 * x[0] + 3.0 * x[1]));
                t.push((0, 1, 3.0 * x[0]));
            }),
        }));
        p
    }

    #[test]
    fn linear_block_checks_to_machine_scale() {
        let p = linear_problem();
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let checks = check_jacobians(&p, &x, 1e-6, 1e-8);
        assert!(checks[0].passed);
        assert!(checks[0].max_rel_error < 1e-10);
    }

    #[test]
    fn quadratic_block_within_fd_tolerance() {
        let p = quadratic_problem();
        let x = DVector::from_vec(vec![0.8, -0.2]);
        let checks = check_jacobians(&p, &x, 1e-6, 1e-6);
        assert!(checks[0].passed, "rel err {}", checks[0].max_rel_error);
    }

    #[test]
    fn corrupted_entry_is_flagged() {
        let mut p = linear_problem();
        let block = p.blocks.pop().unwrap();
        p.add_block(corrupt_block_jacobian(block, 0, 1, 0.5));
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let checks = check_jacobians(&p, &x, 1e-6, 1e-6);
        assert!(!checks[0].passed);
        assert_eq!((checks[0].worst_row, checks[0].worst_col), (0, 1));
        assert!(checks[0].max_rel_error > 0.1);
    }
}
