//! Scratch diagnostic: solve the short-walk problem and print per-block
//! residual maxima so solver stalls can be localized. Not part of the API.

use std::sync::Arc;

use nalgebra::DVector;
use terragait::heightfield::HeightField;
use terragait::nlp::{solve, ConstraintKind, SolveOptions};
use terragait::planner::{build_problem, initialize_variables, PlannerConfig, PlannerContext};
use terragait::robot::RobotModel;

fn block_report(problem: &terragait::nlp::NlpProblem, x: &DVector<f64>) {
    for block in &problem.blocks {
        let mut out = vec![0.0; block.rows()];
        block.eval(x, &mut out);
        let worst = out
            .iter()
            .map(|&v| match block.kind() {
                ConstraintKind::Equality => v.abs(),
                ConstraintKind::Inequality => (-v).max(0.0),
            })
            .fold(0.0f64, f64::max);
        if worst > 1e-5 {
            let at = out
                .iter()
                .enumerate()
                .max_by(|a, b| {
                    let va = match block.kind() {
                        ConstraintKind::Equality => a.1.abs(),
                        ConstraintKind::Inequality => (-a.1).max(0.0),
                    };
                    let vb = match block.kind() {
                        ConstraintKind::Equality => b.1.abs(),
                        ConstraintKind::Inequality => (-b.1).max(0.0),
                    };
                    va.partial_cmp(&vb).unwrap()
                })
                .map(|(i, _)| i)
                .unwrap_or(0);
            println!("  {:28} rows {:4} worst {:10.3e} at row {}", block.name(), block.rows(), worst, at);
        }
    }
}

/// Hold everything except CoM-position and force nodes fixed, linearize the
/// dynamics-linear + CoM boundary rows there (they are exactly linear in that
/// subspace), and solve the least-squares system directly. A near-zero
/// residual proves the subsystem is feasible and any stall is the solver's.
fn lsq_probe(ctx: &PlannerContext, problem: &terragait::nlp::NlpProblem, x0: &DVector<f64>) {
    let layout = &ctx.layout;
    let mut cols: Vec<usize> = Vec::new();
    for node in 0..=layout.n_com_segments {
        let base = layout.com_pos_node(node);
        cols.extend(base..base + 6);
    }
    for leg in &layout.legs {
        for nodes in &leg.force_nodes {
            for slot in nodes.iter().flatten() {
                cols.extend(*slot..*slot + 6);
            }
        }
    }
    let col_of: std::collections::HashMap<usize, usize> =
        cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let mut rows_a: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for block in &problem.blocks {
        let name = block.name();
        if name != "dynamics-linear" && name != "boundary" {
            continue;
        }
        let mut res = vec![0.0; block.rows()];
        block.eval(x0, &mut res);
        let mut trips = Vec::new();
        block.jacobian(x0, &mut trips);
        let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); block.rows()];
        for (r, c, v) in trips {
            if let Some(&cc) = col_of.get(&c) {
                by_row[r].push((cc, v));
            }
        }
        // Rows are linear in the subspace at fixed durations; entries on
        // outside (held) columns are irrelevant to moves inside it.
        for r in 0..block.rows() {
            if !by_row[r].is_empty() {
                rows_a.push(by_row[r].clone());
                rhs.push(-res[r]);
            }
        }
    }
    let (m, n) = (rows_a.len(), cols.len());
    let mut a = nalgebra::DMatrix::zeros(m, n);
    for (r, entries) in rows_a.iter().enumerate() {
        for &(c, v) in entries {
            a[(r, c)] += v;
        }
    }
    let b = DVector::from_vec(rhs);
    let svd = a.clone().svd(true, true);
    let delta = svd.solve(&b, 1e-10).unwrap();
    let resid = (&a * &delta) - &b;
    println!(
        "lsq probe: {m} rows x {n} cols, |residual|_inf {:.3e}, |delta|_inf {:.3e}",
        resid.amax(),
        delta.amax()
    );
}

fn main() {
    let model = RobotModel::default();
    let terrain = HeightField::flat(nalgebra::Vector2::new(-5.0, -5.0), 0.25, 40, 40, 0.0).unwrap();
    let config = PlannerConfig::short_walk();
    let ctx = Arc::new(PlannerContext::new(model, terrain, config).unwrap());
    let problem = build_problem(&ctx);
    let x0 = initialize_variables(&ctx, 1);

    println!("n_vars {}", ctx.n_vars());
    println!("initial violation {:.4e}", problem.max_violation(&x0).unwrap());
    println!("initial blocks:");
    block_report(&problem, &x0);
    lsq_probe(&ctx, &problem, &x0);

    let mut options = SolveOptions::default();
    options.time_budget_s = 120.0;
    options.verbose = true;
    let mut problem = problem;
    for arg in std::env::args().skip(1) {
        let (key, value) = arg.split_once('=').expect("args are key=value");
        match key {
            "max_outer" => options.max_outer = value.parse().unwrap(),
            "max_inner" => options.max_inner = value.parse().unwrap(),
            "penalty_init" => options.penalty_init = value.parse().unwrap(),
            "penalty_growth" => options.penalty_growth = value.parse().unwrap(),
            "penalty_max" => options.penalty_max = value.parse().unwrap(),
            "violation_shrink" => options.violation_shrink = value.parse().unwrap(),
            "time" => options.time_budget_s = value.parse().unwrap(),
            "freeze" => {
                for leg in &ctx.layout.legs {
                    for j in 0..leg.n_phases {
                        let i = leg.durations + j;
                        problem.lower[i] = x0[i];
                        problem.upper[i] = x0[i];
                    }
                }
            }
            "keep" => {
                let prefixes: Vec<&str> = value.split(',').collect();
                problem
                    .blocks
                    .retain(|b| prefixes.iter().any(|p| b.name().starts_with(p)));
                println!(
                    "kept blocks: {:?}",
                    problem.blocks.iter().map(|b| b.name()).collect::<Vec<_>>()
                );
            }
            other => panic!("unknown option {other}"),
        }
    }
    let t = std::time::Instant::now();
    let (x, report) = solve(&problem, &x0, &options).unwrap();
    println!(
        "status {:?} violation {:.4e} outer {} inner {} wall {:.1}s (elapsed {:.1}s)",
        report.status,
        report.max_violation,
        report.outer_iterations,
        report.inner_iterations,
        report.wall_time_s,
        t.elapsed().as_secs_f64()
    );
    println!("final blocks:");
    block_report(&problem, &x);

    // Channel-consistency scan: the block evaluation path (direct from the
    // variable vector) must agree with the reconstructed splines the audit
    // uses. Any gap is a reconstruction bug.
    let com_pos = ctx.com_pos_spline(&x);
    let com_ang = ctx.com_ang_spline(&x);
    let ee: [terragait::spline::PhaseSpline; 4] = std::array::from_fn(|l| ctx.ee_spline(&x, l));
    let force: [terragait::spline::PhaseSpline; 4] = std::array::from_fn(|l| ctx.force_spline(&x, l));
    let mut worst = [(0.0f64, 0.0f64); 6]; // (diff, time) per channel class
    let mut tq = 0.0f64;
    while tq <= 2.0 + 1e-9 {
        let t = tq.min(2.0);
        let a = ctx.com_pos(&x, t);
        let (pv, _, pa) = com_pos.eval(t).unwrap();
        upd(&mut worst[0], (a.value.value - pv).amax().max((a.acc.value - pa).amax()), t);
        let b = ctx.com_ang(&x, t);
        let (av, avel, aa) = com_ang.eval(t).unwrap();
        upd(
            &mut worst[1],
            (b.value.value - av)
                .amax()
                .max((b.vel.value - avel).amax())
                .max((b.acc.value - aa).amax()),
            t,
        );
        for l in 0..4 {
            let w = ctx.ee_world(&x, l, t);
            upd(&mut worst[2], (w.value - ee[l].value(t).unwrap()).amax(), t);
            let f = ctx.force_world(&x, l, t);
            upd(&mut worst[3], (f.value - force[l].value(t).unwrap()).amax(), t);
        }
        tq += 0.05;
    }
    println!(
        "reconstruction gaps: com_pos {:.3e}@{:.2} com_ang {:.3e}@{:.2} ee {:.3e}@{:.2} force {:.3e}@{:.2}",
        worst[0].0, worst[0].1, worst[1].0, worst[1].1, worst[2].0, worst[2].1, worst[3].0, worst[3].1
    );

    // Fine cone scan: where does the force spline leave the friction cone?
    let model = RobotModel::default();
    let mu = model.friction_mu;
    let f_max = ctx.config.f_max;
    for leg in 0..4 {
        let mut worst = (0.0f64, 0.0f64);
        let mut start = 0.0f64;
        for (seg, &tag) in force[leg].segments().iter().zip(force[leg].phase_tags()) {
            if tag == terragait::spline::PhaseKind::Stance {
                let mut tq = start;
                while tq <= start + seg.duration {
                    let f = force[leg].value(tq.min(2.0)).unwrap();
                    let viol = [
                        f.z,
                        f_max - f.z,
                        mu * f.z - f.x.abs(),
                        mu * f.z - f.y.abs(),
                    ]
                    .into_iter()
                    .fold(f64::INFINITY, f64::min)
                        / f_max;
                    if -viol > worst.0 {
                        worst = (-viol, tq);
                    }
                    tq += 0.001;
                }
            }
            start += seg.duration;
        }
        println!("leg {leg} worst cone violation {:.3e} at t {:.3}", worst.0, worst.1);
    }
}

fn upd(slot: &mut (f64, f64), diff: f64, t: f64) {
    if diff > slot.0 {
        *slot = (diff, t);
    }
}
