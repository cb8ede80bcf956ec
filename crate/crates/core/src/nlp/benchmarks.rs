//! Small self-contained benchmark problems exercising the solver end to end.
//!
//! These run in the test suite and behind `terragait check-jacobians`; each
//! has a known solution or feasibility certificate checked independently of
//! the solver's own convergence report.

use nalgebra::DVector;

use super::{solve, ConstraintKind, FnBlock, NlpProblem, SolveOptions, SolveReport, SolveStatus};

pub struct Benchmark {
    pub name: &'static str,
    pub problem: NlpProblem,
    pub x0: DVector<f64>,
    pub options: SolveOptions,
}

#[derive(Debug)]
pub struct BenchmarkOutcome {
    pub name: &'static str,
    pub report: SolveReport,
    pub passed: bool,
    pub detail: String,
}

/// The three shipped benchmarks: interval feasibility, a linear equality
/// system, and the unit-circle equality.
pub fn benchmark_problems() -> Vec<Benchmark> {
    let mut list = Vec::new();

    // 1. Feasibility: 1 <= x <= 2, started far outside.
    let mut p = NlpProblem::new(1);
    p.add_block(Box::new(FnBlock {
        name: "interval".into(),
        kind: ConstraintKind::Inequality,
        rows: 2,
        f: Box::new(|x, out| {
            out[0] = x[0] - 1.0;
            out[1] = 2.0 - x[0];
        }),
        jac: Box::new(|_, t| t.extend_from_slice(&[(0, 0, 1.0), (1, 0, -1.0)])),
    }));
    list.push(Benchmark {
        name: "interval-feasibility",
        problem: p,
        x0: DVector::from_vec(vec![5.0]),
        options: SolveOptions::default(),
    });

    // 2. Linear equalities x+y=1, x-y=0 with unique solution (0.5, 0.5).
    let mut p = NlpProblem::new(2);
    p.add_block(Box::new(FnBlock {
        name: "linear-system".into(),
        kind: ConstraintKind::Equality,
        rows: 2,
        f: Box::new(|x, out| {
            out[0] = x[0] + x[1] - 1.0;
            out[1] = x[0] - x[1];
        }),
        jac: Box::new(|_, t| {
            t.extend_from_slice(&[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -1.0)]);
        }),
    }));
    list.push(Benchmark {
        name: "linear-equality",
        problem: p,
        x0: DVector::from_vec(vec![3.0, -2.0]),
        options: SolveOptions { feas_tol: 1e-8, ..SolveOptions::default() },
    });

    // 3. Unit circle x^2 + y^2 = 1 from (2, 0).
    let mut p = NlpProblem::new(2);
    p.add_block(Box::new(FnBlock {
        name: "unit-circle".into(),
        kind: ConstraintKind::Equality,
        rows: 1,
        f: Box::new(|x, out| out[0] = x[0] * x[0] + x[1] * x[1] - 1.0),
        jac: Box::new(|x, t| {
            t.push((0, 0, 2.0 * x[0]));
            t.push((0, 1, 2.0 * x[1]));
        }),
    }));
    list.push(Benchmark {
        name: "unit-circle",
        problem: p,
        x0: DVector::from_vec(vec![2.0, 0.0]),
        options: SolveOptions::default(),
    });

    list
}

/// Solve every benchmark and verify its certificate.
pub fn run_benchmarks() -> Vec<BenchmarkOutcome> {
    benchmark_problems()
        .into_iter()
        .map(|bench| {
            let (x, report) = solve(&bench.problem, &bench.x0, &bench.options)
                .expect("benchmark problems have finite residuals");
            let (passed, detail) = verify(bench.name, &x, &report);
            BenchmarkOutcome { name: bench.name, report, passed, detail }
        })
        .collect()
}

fn verify(name: &str, x: &DVector<f64>, report: &SolveReport) -> (bool, String) {
    let converged = report.status == SolveStatus::Converged;
    match name {
        "interval-feasibility" => {
            let inside = x[0] >= 1.0 - 1e-4 && x[0] <= 2.0 + 1e-4;
            (
                converged && inside && report.max_violation <= 1e-4,
                format!("x = {:.6}, violation = {:.2e}", x[0], report.max_violation),
            )
        }
        "linear-equality" => {
            let err = (x[0] - 0.5).abs().max((x[1] - 0.5).abs());
            (
                converged && err < 1e-6,
                format!("x = ({:.8}, {:.8}), err = {:.2e}", x[0], x[1], err),
            )
        }
        "unit-circle" => {
            let res = (x[0] * x[0] + x[1] * x[1] - 1.0).abs();
            (
                converged && res <= 1e-4,
                format!("x = ({:.6}, {:.6}), |residual| = {:.2e}", x[0], x[1], res),
            )
        }
        other => (false, format!("unknown benchmark {other}")),
    }
}
