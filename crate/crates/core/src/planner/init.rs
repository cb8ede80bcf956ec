//! Gait schedule and initial variable vector.
//!
//! The walking initializer seeds a fly-trot: diagonal pairs swing in
//! alternation with a flight overlap between them, the CoM tracks a straight
//! line to the goal at nominal stance height, feet start under their hips and
//! forces split body weight evenly. Gaussian noise on position and force
//! nodes diversifies the solves; a standing problem is seeded exactly.

use nalgebra::{DVector, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::robot::N_LEGS;
use crate::spline::PhaseKind;

use super::blocks::{goal_com, start_com};
use super::context::PlannerContext;
use super::PlannerConfig;

/// Swing window length as a fraction of the gait cycle.
const SWING_CYCLE_FRACTION: f64 = 0.3;
/// Cycle offsets of the two diagonal pairs: {lf, rh} lift first, {rf, lh}
/// half a cycle later.
const PAIR_OFFSETS: [f64; N_LEGS] = [0.35, 0.85, 0.85, 0.35];
/// Initial apex lift of swing interior nodes above the contact midpoint.
const SWING_APEX_LIFT: f64 = 0.15;

/// Phase durations (stance first, alternating) of one leg's fly-trot
/// schedule; durations sum to the horizon exactly.
pub fn trot_schedule(config: &PlannerConfig, leg: usize) -> Vec<f64> {
    let t = config.horizon;
    let n_swing = config.n_swing_phases;
    if n_swing == 0 {
        return vec![t];
    }
    let cycle = t / (n_swing + 1) as f64;
    let swing = SWING_CYCLE_FRACTION * cycle;
    let first = PAIR_OFFSETS[leg] * cycle;

    let mut durations = vec![first];
    for k in 0..n_swing {
        durations.push(swing);
        if k + 1 < n_swing {
            durations.push(cycle - swing);
        }
    }
    let used: f64 = durations.iter().sum();
    durations.push(t - used);
    durations
}

/// Initial variable vector for the problem described by `ctx`.
///
/// Position-valued nodes (CoM positions, contact points, swing interior
/// positions) receive Gaussian noise of std `init_pos_noise`; force values
/// receive `init_force_noise`. Standing problems (no swing phases) are seeded
/// without noise. Durations are exact, so the phase-sum equalities hold at
/// the initial point.
pub fn initialize_variables(ctx: &PlannerContext, seed: u64) -> DVector<f64> {
    let config = &ctx.config;
    let layout = &ctx.layout;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let standing = config.n_swing_phases == 0;
    let pos_noise = if standing { 0.0 } else { config.init_pos_noise };
    let force_noise = if standing { 0.0 } else { config.init_force_noise };
    let draw = |rng: &mut ChaCha8Rng, sigma: f64| -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).unwrap().sample(rng)
        } else {
            0.0
        }
    };

    let mut x = DVector::from_element(layout.n_vars, 0.0);
    let start = start_com(ctx);
    let goal = goal_com(ctx);
    let vel = Vector3::new((goal.x - start.x) / config.horizon, (goal.y - start.y) / config.horizon, 0.0);

    // CoM path: straight line at stance height over the terrain; orientation
    // nodes stay zero.
    let n = layout.n_com_segments;
    for k in 0..=n {
        let a = k as f64 / n as f64;
        let xy = start.xy() * (1.0 - a) + goal.xy() * a;
        let z = ctx.terrain.height_at_clamped(xy) + ctx.model.nominal_stance_depth;
        let base = layout.com_pos_node(k);
        x[base] = xy.x + draw(&mut rng, pos_noise);
        x[base + 1] = xy.y + draw(&mut rng, pos_noise);
        x[base + 2] = z + draw(&mut rng, pos_noise);
        x[base + 3] = vel.x;
        x[base + 4] = vel.y;
        x[base + 5] = vel.z;
    }

    let com_xy_at = |t: f64| -> Vector2<f64> {
        let a = (t / config.horizon).clamp(0.0, 1.0);
        start.xy() * (1.0 - a) + goal.xy() * a
    };

    for leg in 0..N_LEGS {
        let l = &layout.legs[leg];
        let durations = trot_schedule(config, leg);
        for (j, &d) in durations.iter().enumerate() {
            x[l.durations + j] = d;
        }

        // Contact points under the hip at mid-stance, on the terrain.
        let hip = ctx.model.hip_offsets[leg];
        let mut starts = vec![0.0];
        for &d in &durations {
            starts.push(starts.last().unwrap() + d);
        }
        let mut contacts = Vec::with_capacity(l.n_stance());
        for phase in (0..l.n_phases).step_by(2) {
            let mid = starts[phase] + 0.5 * durations[phase];
            let xy = com_xy_at(mid) + hip.xy();
            let z = ctx.terrain.height_at_clamped(xy);
            let base = l.stance_points[l.stance_index(phase)];
            let p = Vector3::new(
                xy.x + draw(&mut rng, pos_noise),
                xy.y + draw(&mut rng, pos_noise),
                z + draw(&mut rng, pos_noise),
            );
            x[base] = p.x;
            x[base + 1] = p.y;
            x[base + 2] = p.z;
            contacts.push(Vector3::new(xy.x, xy.y, z));
        }

        // Swing interior nodes: lifted midpoint between the flanking
        // contacts, horizontal velocity carrying the step.
        for w in 0..l.n_swing() {
            debug_assert_eq!(l.phase_kind(2 * w + 1), PhaseKind::Swing);
            let d_swing = durations[2 * w + 1];
            let mid = (contacts[w] + contacts[w + 1]) * 0.5 + Vector3::new(0.0, 0.0, SWING_APEX_LIFT);
            let v = (contacts[w + 1] - contacts[w]) / d_swing;
            let base = l.swing_nodes[w];
            x[base] = mid.x + draw(&mut rng, pos_noise);
            x[base + 1] = mid.y + draw(&mut rng, pos_noise);
            x[base + 2] = mid.z + draw(&mut rng, pos_noise);
            x[base + 3] = v.x;
            x[base + 4] = v.y;
            x[base + 5] = 0.0;
        }

        // Free force nodes: a quarter of body weight, vertical; rates zero.
        let f_z = ctx.model.mass * config.gravity / N_LEGS as f64;
        for nodes in &l.force_nodes {
            for &base in nodes.iter().flatten() {
                x[base] = draw(&mut rng, force_noise);
                x[base + 1] = draw(&mut rng, force_noise);
                x[base + 2] = f_z + draw(&mut rng, force_noise);
            }
        }
    }
    x
}
