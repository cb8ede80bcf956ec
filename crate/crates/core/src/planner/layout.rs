//! Flat variable layout of the trajectory optimization problem.
//!
//! Variable order: CoM position nodes, orientation nodes, then per leg the
//! phase durations, stance contact points, swing interior nodes and force
//! nodes. Every helper returns the base index of a 3- or 6-wide group.

use crate::robot::N_LEGS;
use crate::spline::PhaseKind;

/// Per-stance force nodes: 4 Hermite nodes across the phase, each holding
/// force (3) and force rate (3). Nodes adjacent to a swing phase are pinned
/// to zero and not variables.
pub const FORCE_NODES_PER_STANCE: usize = 4;

#[derive(Debug, Clone)]
pub struct LegLayout {
    /// Odd phase count; phase 0 is stance.
    pub n_phases: usize,
    /// Base index of the `n_phases` duration variables.
    pub durations: usize,
    /// Base index of each stance contact point (3 vars: x, y, z).
    pub stance_points: Vec<usize>,
    /// Base index of each swing interior node (6 vars: position + velocity).
    pub swing_nodes: Vec<usize>,
    /// Per stance phase, base indices of the four force nodes (6 vars each:
    /// force + force rate); `None` marks a node pinned to zero.
    pub force_nodes: Vec<[Option<usize>; FORCE_NODES_PER_STANCE]>,
}

impl LegLayout {
    pub fn n_stance(&self) -> usize {
        self.stance_points.len()
    }

    pub fn n_swing(&self) -> usize {
        self.swing_nodes.len()
    }

    pub fn phase_kind(&self, phase: usize) -> PhaseKind {
        if phase % 2 == 0 {
            PhaseKind::Stance
        } else {
            PhaseKind::Swing
        }
    }

    /// Stance index of a stance phase (phase 2s -> s).
    pub fn stance_index(&self, phase: usize) -> usize {
        debug_assert_eq!(phase % 2, 0);
        phase / 2
    }

    /// Swing index of a swing phase (phase 2w+1 -> w).
    pub fn swing_index(&self, phase: usize) -> usize {
        debug_assert_eq!(phase % 2, 1);
        phase / 2
    }
}

#[derive(Debug, Clone)]
pub struct VarLayout {
    pub n_com_segments: usize,
    /// Base index of CoM position nodes: `(n_com_segments+1)` nodes x 6
    /// (position, velocity).
    pub com_pos: usize,
    /// Base index of orientation nodes, same shape (Euler angles, rates).
    pub com_ang: usize,
    pub legs: [LegLayout; N_LEGS],
    pub n_vars: usize,
}

impl VarLayout {
    /// Build the layout for `n_com_segments` CoM/orientation segments and
    /// `n_swing` swing phases per leg (every leg starts and ends in stance).
    pub fn new(n_com_segments: usize, n_swing: usize) -> Self {
        assert!(n_com_segments >= 1);
        let n_phases = 2 * n_swing + 1;
        let n_stance = n_swing + 1;
        let mut next = 0usize;
        let mut take = |width: usize| {
            let base = next;
            next += width;
            base
        };

        let com_pos = take(6 * (n_com_segments + 1));
        let com_ang = take(6 * (n_com_segments + 1));

        let legs = std::array::from_fn(|_| {
            let durations = take(n_phases);
            let stance_points = (0..n_stance).map(|_| take(3)).collect();
            let swing_nodes = (0..n_swing).map(|_| take(6)).collect();
            let force_nodes = (0..n_stance)
                .map(|s| {
                    let first_stance = s == 0;
                    let last_stance = s == n_stance - 1;
                    [
                        first_stance.then(|| take(6)),
                        Some(take(6)),
                        Some(take(6)),
                        last_stance.then(|| take(6)),
                    ]
                })
                .collect();
            LegLayout { n_phases, durations, stance_points, swing_nodes, force_nodes }
        });

        VarLayout { n_com_segments, com_pos, com_ang, legs, n_vars: next }
    }

    /// Closed-form variable count: `12 (n_com+1)` CoM/orientation values plus,
    /// per leg, `n_phases` durations, `3 n_stance` contact coordinates,
    /// `6 n_swing` swing-node values and `12 n_stance + 12` free force-node
    /// values (two interior nodes per stance plus one free boundary node at
    /// each horizon end).
    pub fn expected_vars(n_com_segments: usize, n_swing: usize) -> usize {
        let n_phases = 2 * n_swing + 1;
        let n_stance = n_swing + 1;
        let per_leg = n_phases + 3 * n_stance + 6 * n_swing + 12 * n_stance + 12;
        12 * (n_com_segments + 1) + N_LEGS * per_leg
    }

    /// Base index of CoM position node `k` (3 position vars; velocity at +3).
    pub fn com_pos_node(&self, k: usize) -> usize {
        debug_assert!(k <= self.n_com_segments);
        self.com_pos + 6 * k
    }

    pub fn com_ang_node(&self, k: usize) -> usize {
        debug_assert!(k <= self.n_com_segments);
        self.com_ang + 6 * k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_matches_closed_form_count() {
        for (n_com, n_swing) in [(10, 4), (10, 2), (10, 0), (4, 1)] {
            let layout = VarLayout::new(n_com, n_swing);
            assert_eq!(layout.n_vars, VarLayout::expected_vars(n_com, n_swing));
        }
    }

    #[test]
    fn layout_indices_are_disjoint_and_cover_all_vars() {
        let layout = VarLayout::new(10, 2);
        let mut seen = vec![false; layout.n_vars];
        let mut mark = |base: usize, width: usize| {
            for i in base..base + width {
                assert!(!seen[i], "variable {i} assigned twice");
                seen[i] = true;
            }
        };
        for k in 0..=layout.n_com_segments {
            mark(layout.com_pos_node(k), 6);
            mark(layout.com_ang_node(k), 6);
        }
        for leg in &layout.legs {
            mark(leg.durations, leg.n_phases);
            for &p in &leg.stance_points {
                mark(p, 3);
            }
            for &w in &leg.swing_nodes {
                mark(w, 6);
            }
            for nodes in &leg.force_nodes {
                for node in nodes.iter().flatten() {
                    mark(*node, 6);
                }
            }
        }
        assert!(seen.iter().all(|&s| s), "layout leaves gaps");
    }

    #[test]
    fn standing_layout_has_single_stance() {
        let layout = VarLayout::new(10, 0);
        for leg in &layout.legs {
            assert_eq!(leg.n_phases, 1);
            assert_eq!(leg.n_stance(), 1);
            assert_eq!(leg.n_swing(), 0);
            // Sole stance spans the horizon: all four force nodes free.
            assert!(leg.force_nodes[0].iter().all(Option::is_some));
        }
    }
}
