//! Shared evaluation context: maps the flat variable vector to spline
//! quantities with sparse analytic derivatives.
//!
//! Two query styles exist. World-time queries (`*_world`, `com_*`) evaluate a
//! channel at a fixed absolute time; for phase-structured channels the
//! containing segment then depends on the duration variables and the
//! derivative picks up shift and stretch terms. Phase-local queries
//! (`*_local`) evaluate at a fixed fraction of one phase, so only the
//! containing segment's own duration enters.

use nalgebra::{DVector, Vector3};

use crate::heightfield::HeightField;
use crate::robot::{RobotModel, N_LEGS};
use crate::spline::{BasisWeights, HermiteSegment, PhaseKind, PhaseSchedule, PhaseSpline};

use super::layout::VarLayout;
use super::{PlannerConfig, PlannerError};

/// Value of a 3-vector expression with its sparse derivative.
#[derive(Debug, Clone, Default)]
pub struct Vec3Deps {
    pub value: Vector3<f64>,
    /// `(base, w)`: component `c` has derivative `w` w.r.t. `x[base + c]`.
    /// Vector-valued nodes enter all three components with one shared weight.
    pub diag: Vec<(usize, f64)>,
    /// `(index, g)`: full 3-vector derivative w.r.t. the scalar `x[index]`
    /// (duration variables bend all components at once).
    pub dense: Vec<(usize, Vector3<f64>)>,
}

impl Vec3Deps {
    fn push_diag(&mut self, src: NodeSrc, w: f64) {
        if let NodeSrc::Var(base) = src {
            self.diag.push((base, w));
        }
    }

    fn add_dense(&mut self, index: usize, g: Vector3<f64>) {
        if let Some(entry) = self.dense.iter_mut().find(|e| e.0 == index) {
            entry.1 += g;
        } else {
            self.dense.push((index, g));
        }
    }
}

/// Value, velocity and acceleration of a fixed-duration channel, each with
/// node-variable derivatives.
#[derive(Debug, Clone)]
pub struct ChannelEval {
    pub value: Vec3Deps,
    pub vel: Vec3Deps,
    pub acc: Vec3Deps,
}

/// Where a Hermite node of a phase-structured channel comes from: a variable
/// block of three, or the constant zero (pinned force nodes, contact
/// velocities, swing-phase forces).
#[derive(Debug, Clone, Copy)]
enum NodeSrc {
    Var(usize),
    Zero,
}

/// One segment of a phase-structured channel. The segment duration is
/// `dur_factor * x[dur_var]` (1 for whole phases, 1/2 for swing halves, 1/3
/// for force thirds).
#[derive(Debug, Clone, Copy)]
struct SegSrc {
    p0: NodeSrc,
    v0: NodeSrc,
    p1: NodeSrc,
    v1: NodeSrc,
    dur_var: usize,
    dur_factor: f64,
}

#[derive(Debug, Clone)]
struct ChannelMeta {
    segs: Vec<SegSrc>,
    /// First segment index of each phase.
    phase_first: Vec<usize>,
    /// Segment count of each phase.
    phase_len: Vec<usize>,
}

/// Immutable problem data shared by every constraint block.
pub struct PlannerContext {
    pub model: RobotModel,
    pub terrain: HeightField,
    pub config: PlannerConfig,
    pub layout: VarLayout,
    ee_meta: [ChannelMeta; N_LEGS],
    force_meta: [ChannelMeta; N_LEGS],
}

impl PlannerContext {
    pub fn new(
        model: RobotModel,
        terrain: HeightField,
        config: PlannerConfig,
    ) -> Result<Self, PlannerError> {
        config.validate()?;
        model.validate()?;
        let layout = VarLayout::new(config.n_com_segments, config.n_swing_phases);
        let ee_meta = std::array::from_fn(|leg| build_ee_meta(&layout, leg));
        let force_meta = std::array::from_fn(|leg| build_force_meta(&layout, leg));
        Ok(PlannerContext {
            model,
            terrain,
            config,
            layout,
            ee_meta,
            force_meta,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.layout.n_vars
    }

    /// Phase durations of one leg as stored in `x`.
    pub fn leg_durations(&self, x: &DVector<f64>, leg: usize) -> Vec<f64> {
        let l = &self.layout.legs[leg];
        (0..l.n_phases).map(|j| x[l.durations + j]).collect()
    }

    pub fn leg_schedule(&self, x: &DVector<f64>, leg: usize) -> PhaseSchedule {
        PhaseSchedule::new(PhaseKind::Stance, self.leg_durations(x, leg))
    }

    fn node(x: &DVector<f64>, src: NodeSrc) -> Vector3<f64> {
        match src {
            NodeSrc::Var(base) => Vector3::new(x[base], x[base + 1], x[base + 2]),
            NodeSrc::Zero => Vector3::zeros(),
        }
    }

    /// End-effector position of `leg` at absolute time `t`.
    pub fn ee_world(&self, x: &DVector<f64>, leg: usize, t: f64) -> Vec3Deps {
        self.eval_world(x, &self.ee_meta[leg], t)
    }

    /// Contact force of `leg` at absolute time `t`.
    pub fn force_world(&self, x: &DVector<f64>, leg: usize, t: f64) -> Vec3Deps {
        self.eval_world(x, &self.force_meta[leg], t)
    }

    /// End-effector position of `leg` at fraction `frac` of phase `phase`.
    pub fn ee_local(&self, x: &DVector<f64>, leg: usize, phase: usize, frac: f64) -> Vec3Deps {
        self.eval_local(x, &self.ee_meta[leg], phase, frac)
    }

    /// Contact force of `leg` at fraction `frac` of phase `phase`.
    pub fn force_local(&self, x: &DVector<f64>, leg: usize, phase: usize, frac: f64) -> Vec3Deps {
        self.eval_local(x, &self.force_meta[leg], phase, frac)
    }

    pub fn com_pos(&self, x: &DVector<f64>, t: f64) -> ChannelEval {
        self.eval_fixed(x, self.layout.com_pos, t, false)
    }

    pub fn com_ang(&self, x: &DVector<f64>, t: f64) -> ChannelEval {
        self.eval_fixed(x, self.layout.com_ang, t, false)
    }

    /// Like [`Self::com_pos`] but resolving knot times to the requested side.
    /// The CoM splines are only C1, so the acceleration at an interior knot
    /// has distinct left and right limits; dynamics rows pin both.
    pub fn com_pos_at(&self, x: &DVector<f64>, t: f64, left_limit: bool) -> ChannelEval {
        self.eval_fixed(x, self.layout.com_pos, t, left_limit)
    }

    /// See [`Self::com_pos_at`].
    pub fn com_ang_at(&self, x: &DVector<f64>, t: f64, left_limit: bool) -> ChannelEval {
        self.eval_fixed(x, self.layout.com_ang, t, left_limit)
    }

    /// Evaluate a phase-structured channel at absolute time `t`.
    ///
    /// The containing segment is found by walking the current durations
    /// (knots resolve left); queries past the accumulated total — possible
    /// while the phase-sum equality is still violated — extrapolate the last
    /// segment so the evaluation stays smooth in the duration variables.
    fn eval_world(&self, x: &DVector<f64>, meta: &ChannelMeta, t: f64) -> Vec3Deps {
        let n = meta.segs.len();
        let mut i = 0;
        let mut start = 0.0;
        for (k, src) in meta.segs.iter().enumerate() {
            let end = start + src.dur_factor * x[src.dur_var];
            i = k;
            if t <= end || k + 1 == n {
                break;
            }
            start = end;
        }
        let src = meta.segs[i];
        let dur = src.dur_factor * x[src.dur_var];
        let u = t - start;

        let seg = HermiteSegment {
            p0: Self::node(x, src.p0),
            v0: Self::node(x, src.v0),
            p1: Self::node(x, src.p1),
            v1: Self::node(x, src.v1),
            duration: dur,
        };
        let w = BasisWeights::value(u, dur);
        let mut deps = Vec3Deps {
            value: w.combine(&seg.p0, &seg.v0, &seg.p1, &seg.v1),
            ..Default::default()
        };
        deps.push_diag(src.p0, w.p0);
        deps.push_diag(src.v0, w.v0);
        deps.push_diag(src.p1, w.p1);
        deps.push_diag(src.v1, w.v1);

        // Duration sensitivities: earlier segments shift the local time,
        // the containing segment stretches around it.
        let (_, vel, _) = seg.eval(u);
        for src_k in meta.segs.iter().take(i) {
            deps.add_dense(src_k.dur_var, -vel * src_k.dur_factor);
        }
        deps.add_dense(src.dur_var, seg.value_duration_partial(u) * src.dur_factor);
        deps.dense.retain(|e| e.1.norm() > 0.0);
        deps
    }

    /// Evaluate a phase-structured channel at fraction `frac` in `[0, 1]` of
    /// one phase. Only the phase's own duration variable enters, through the
    /// velocity weights.
    fn eval_local(&self, x: &DVector<f64>, meta: &ChannelMeta, phase: usize, frac: f64) -> Vec3Deps {
        let len = meta.phase_len[phase];
        let scaled = frac.clamp(0.0, 1.0) * len as f64;
        let sub = (scaled.floor() as usize).min(len - 1);
        let s = scaled - sub as f64;
        let src = meta.segs[meta.phase_first[phase] + sub];
        let dur = src.dur_factor * x[src.dur_var];

        let p0 = Self::node(x, src.p0);
        let v0 = Self::node(x, src.v0);
        let p1 = Self::node(x, src.p1);
        let v1 = Self::node(x, src.v1);
        let w = BasisWeights::value(s * dur, dur);
        let mut deps = Vec3Deps {
            value: w.combine(&p0, &v0, &p1, &v1),
            ..Default::default()
        };
        deps.push_diag(src.p0, w.p0);
        deps.push_diag(src.v0, w.v0);
        deps.push_diag(src.p1, w.p1);
        deps.push_diag(src.v1, w.v1);

        // At fixed fraction s the value depends on the duration only through
        // the folded velocity weights: d/dT = h10(s) v0 + h11(s) v1.
        let s2 = s * s;
        let s3 = s2 * s;
        let g = v0 * (s3 - 2.0 * s2 + s) + v1 * (s3 - s2);
        if g.norm() > 0.0 {
            deps.add_dense(src.dur_var, g * src.dur_factor);
        }
        deps
    }

    /// Evaluate a fixed-duration channel (CoM position or orientation) whose
    /// nodes live at `base + 6k`. Knot times resolve to the right segment,
    /// or to the left one when `left_limit` is set.
    fn eval_fixed(&self, x: &DVector<f64>, base: usize, t: f64, left_limit: bool) -> ChannelEval {
        let n = self.layout.n_com_segments;
        let seg_dur = self.config.horizon / n as f64;
        let pos = t / seg_dur - if left_limit { 1e-9 } else { 0.0 };
        let k = (pos.floor().max(0.0) as usize).min(n - 1);
        let u = t - k as f64 * seg_dur;
        let srcs = [base + 6 * k, base + 6 * k + 3, base + 6 * (k + 1), base + 6 * (k + 1) + 3];
        let vals: Vec<Vector3<f64>> = srcs
            .iter()
            .map(|&b| Vector3::new(x[b], x[b + 1], x[b + 2]))
            .collect();
        let assemble = |w: BasisWeights| Vec3Deps {
            value: w.combine(&vals[0], &vals[1], &vals[2], &vals[3]),
            diag: vec![(srcs[0], w.p0), (srcs[1], w.v0), (srcs[2], w.p1), (srcs[3], w.v1)],
            dense: Vec::new(),
        };
        ChannelEval {
            value: assemble(BasisWeights::value(u, seg_dur)),
            vel: assemble(BasisWeights::velocity(u, seg_dur)),
            acc: assemble(BasisWeights::acceleration(u, seg_dur)),
        }
    }

    /// Reconstruct plain splines from a variable vector.
    pub fn ee_spline(&self, x: &DVector<f64>, leg: usize) -> PhaseSpline {
        self.build_spline(x, &self.ee_meta[leg], leg)
    }

    pub fn force_spline(&self, x: &DVector<f64>, leg: usize) -> PhaseSpline {
        self.build_spline(x, &self.force_meta[leg], leg)
    }

    fn build_spline(&self, x: &DVector<f64>, meta: &ChannelMeta, leg: usize) -> PhaseSpline {
        let l = &self.layout.legs[leg];
        let mut segments = Vec::with_capacity(meta.segs.len());
        let mut tags = Vec::with_capacity(meta.segs.len());
        for (phase, (&first, &len)) in meta.phase_first.iter().zip(&meta.phase_len).enumerate() {
            for src in &meta.segs[first..first + len] {
                segments.push(HermiteSegment {
                    p0: Self::node(x, src.p0),
                    v0: Self::node(x, src.v0),
                    p1: Self::node(x, src.p1),
                    v1: Self::node(x, src.v1),
                    duration: src.dur_factor * x[src.dur_var],
                });
                tags.push(l.phase_kind(phase));
            }
        }
        PhaseSpline::with_tags(segments, tags)
    }

    pub fn com_pos_spline(&self, x: &DVector<f64>) -> PhaseSpline {
        self.build_fixed_spline(x, self.layout.com_pos)
    }

    pub fn com_ang_spline(&self, x: &DVector<f64>) -> PhaseSpline {
        self.build_fixed_spline(x, self.layout.com_ang)
    }

    fn build_fixed_spline(&self, x: &DVector<f64>, base: usize) -> PhaseSpline {
        let n = self.layout.n_com_segments;
        let seg_dur = self.config.horizon / n as f64;
        let node = |k: usize, off: usize| {
            let b = base + 6 * k + off;
            Vector3::new(x[b], x[b + 1], x[b + 2])
        };
        let segments = (0..n)
            .map(|k| HermiteSegment {
                p0: node(k, 0),
                v0: node(k, 3),
                p1: node(k + 1, 0),
                v1: node(k + 1, 3),
                duration: seg_dur,
            })
            .collect();
        PhaseSpline::new(segments)
    }
}

fn build_ee_meta(layout: &VarLayout, leg: usize) -> ChannelMeta {
    let l = &layout.legs[leg];
    let mut segs = Vec::new();
    let mut phase_first = Vec::new();
    let mut phase_len = Vec::new();
    for phase in 0..l.n_phases {
        phase_first.push(segs.len());
        let dur_var = l.durations + phase;
        if l.phase_kind(phase) == PhaseKind::Stance {
            let p = NodeSrc::Var(l.stance_points[l.stance_index(phase)]);
            segs.push(SegSrc {
                p0: p,
                v0: NodeSrc::Zero,
                p1: p,
                v1: NodeSrc::Zero,
                dur_var,
                dur_factor: 1.0,
            });
        } else {
            // Swing: contact -> interior node -> next contact, two halves.
            let w = l.swing_index(phase);
            let prev = NodeSrc::Var(l.stance_points[w]);
            let next = NodeSrc::Var(l.stance_points[w + 1]);
            let mid_pos = NodeSrc::Var(l.swing_nodes[w]);
            let mid_vel = NodeSrc::Var(l.swing_nodes[w] + 3);
            segs.push(SegSrc {
                p0: prev,
                v0: NodeSrc::Zero,
                p1: mid_pos,
                v1: mid_vel,
                dur_var,
                dur_factor: 0.5,
            });
            segs.push(SegSrc {
                p0: mid_pos,
                v0: mid_vel,
                p1: next,
                v1: NodeSrc::Zero,
                dur_var,
                dur_factor: 0.5,
            });
        }
        phase_len.push(segs.len() - phase_first.last().unwrap());
    }
    ChannelMeta { segs, phase_first, phase_len }
}

fn build_force_meta(layout: &VarLayout, leg: usize) -> ChannelMeta {
    let l = &layout.legs[leg];
    let node_src = |slot: Option<usize>, off: usize| match slot {
        Some(base) => NodeSrc::Var(base + off),
        None => NodeSrc::Zero,
    };
    let mut segs = Vec::new();
    let mut phase_first = Vec::new();
    let mut phase_len = Vec::new();
    for phase in 0..l.n_phases {
        phase_first.push(segs.len());
        let dur_var = l.durations + phase;
        if l.phase_kind(phase) == PhaseKind::Stance {
            let nodes = &l.force_nodes[l.stance_index(phase)];
            for k in 0..3 {
                segs.push(SegSrc {
                    p0: node_src(nodes[k], 0),
                    v0: node_src(nodes[k], 3),
                    p1: node_src(nodes[k + 1], 0),
                    v1: node_src(nodes[k + 1], 3),
                    dur_var,
                    dur_factor: 1.0 / 3.0,
                });
            }
        } else {
            // Swing force is the constant zero function.
            segs.push(SegSrc {
                p0: NodeSrc::Zero,
                v0: NodeSrc::Zero,
                p1: NodeSrc::Zero,
                v1: NodeSrc::Zero,
                dur_var,
                dur_factor: 1.0,
            });
        }
        phase_len.push(segs.len() - phase_first.last().unwrap());
    }
    ChannelMeta { segs, phase_first, phase_len }
}
