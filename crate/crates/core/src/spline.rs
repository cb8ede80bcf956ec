//! Piecewise cubic Hermite splines with variable segment durations.
//!
//! Every planner decision channel (CoM position, base orientation,
//! end-effector paths and contact forces) is represented as a [`PhaseSpline`].
//! Evaluation, node-parameter weights and duration sensitivities are all
//! analytic; the duration sensitivities are what make phase durations usable
//! as optimization variables.

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SplineError {
    #[error("time {t} outside spline domain [0, {total}]")]
    OutOfDomain { t: f64, total: f64 },
    #[error("spline has no segments")]
    Empty,
}

/// Contact state of an end-effector spline segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Stance,
    Swing,
}

impl PhaseKind {
    pub fn other(self) -> Self {
        match self {
            PhaseKind::Stance => PhaseKind::Swing,
            PhaseKind::Swing => PhaseKind::Stance,
        }
    }
}

/// Cubic Hermite basis weights at normalized time `s = t / duration`.
///
/// `value = p0*b.p0 + v0*b.v0 + p1*b.p1 + v1*b.v1`, with the duration factors
/// already folded into the velocity weights. The same structure is returned
/// for the first and second time derivatives.
#[derive(Debug, Clone, Copy)]
pub struct BasisWeights {
    pub p0: f64,
    pub v0: f64,
    pub p1: f64,
    pub v1: f64,
}

impl BasisWeights {
    /// Weights for the value at local time `u` in a segment of length `dur`.
    pub fn value(u: f64, dur: f64) -> Self {
        let s = u / dur;
        let s2 = s * s;
        let s3 = s2 * s;
        BasisWeights {
            p0: 2.0 * s3 - 3.0 * s2 + 1.0,
            v0: (s3 - 2.0 * s2 + s) * dur,
            p1: -2.0 * s3 + 3.0 * s2,
            v1: (s3 - s2) * dur,
        }
    }

    /// Weights for the first time derivative.
    pub fn velocity(u: f64, dur: f64) -> Self {
        let s = u / dur;
        let s2 = s * s;
        BasisWeights {
            p0: (6.0 * s2 - 6.0 * s) / dur,
            v0: 3.0 * s2 - 4.0 * s + 1.0,
            p1: (-6.0 * s2 + 6.0 * s) / dur,
            v1: 3.0 * s2 - 2.0 * s,
        }
    }

    /// Weights for the second time derivative.
    pub fn acceleration(u: f64, dur: f64) -> Self {
        let s = u / dur;
        BasisWeights {
            p0: (12.0 * s - 6.0) / (dur * dur),
            v0: (6.0 * s - 4.0) / dur,
            p1: (-12.0 * s + 6.0) / (dur * dur),
            v1: (6.0 * s - 2.0) / dur,
        }
    }

    pub fn combine(&self, p0: &Vector3<f64>, v0: &Vector3<f64>, p1: &Vector3<f64>, v1: &Vector3<f64>) -> Vector3<f64> {
        p0 * self.p0 + v0 * self.v0 + p1 * self.p1 + v1 * self.v1
    }
}

/// One cubic Hermite segment over `[0, duration]`.
#[derive(Debug, Clone)]
pub struct HermiteSegment {
    pub p0: Vector3<f64>,
    pub v0: Vector3<f64>,
    pub p1: Vector3<f64>,
    pub v1: Vector3<f64>,
    pub duration: f64,
}

impl HermiteSegment {
    pub fn constant(p: Vector3<f64>, duration: f64) -> Self {
        HermiteSegment {
            p0: p,
            v0: Vector3::zeros(),
            p1: p,
            v1: Vector3::zeros(),
            duration,
        }
    }

    pub fn eval(&self, u: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let val = BasisWeights::value(u, self.duration).combine(&self.p0, &self.v0, &self.p1, &self.v1);
        let vel = BasisWeights::velocity(u, self.duration).combine(&self.p0, &self.v0, &self.p1, &self.v1);
        let acc = BasisWeights::acceleration(u, self.duration).combine(&self.p0, &self.v0, &self.p1, &self.v1);
        (val, vel, acc)
    }

    /// Partial of the value at fixed local time `u` with respect to the
    /// segment's own duration.
    pub fn value_duration_partial(&self, u: f64) -> Vector3<f64> {
        let dur = self.duration;
        let s = u / dur;
        let s2 = s * s;
        let s3 = s2 * s;
        let (_, vel, _) = self.eval(u);
        // d/dT [h(s)] with s = u/T held at fixed u, plus the explicit T factors
        // on the velocity weights.
        -vel * (u / dur) + self.v0 * (s3 - 2.0 * s2 + s) + self.v1 * (s3 - s2)
    }
}

/// Piecewise cubic Hermite spline; segments are contiguous in time.
///
/// `phase_tags` is populated for end-effector channels (one tag per segment)
/// and empty otherwise.
#[derive(Debug, Clone)]
pub struct PhaseSpline {
    segments: Vec<HermiteSegment>,
    phase_tags: Vec<PhaseKind>,
}

impl PhaseSpline {
    pub fn new(segments: Vec<HermiteSegment>) -> Self {
        PhaseSpline {
            segments,
            phase_tags: Vec::new(),
        }
    }

    pub fn with_tags(segments: Vec<HermiteSegment>, phase_tags: Vec<PhaseKind>) -> Self {
        assert_eq!(segments.len(), phase_tags.len());
        PhaseSpline {
            segments,
            phase_tags,
        }
    }

    pub fn segments(&self) -> &[HermiteSegment] {
        &self.segments
    }

    pub fn phase_tags(&self) -> &[PhaseKind] {
        &self.phase_tags
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Containing segment index and local time for a query at `t`.
    ///
    /// Knot times resolve to the segment that ends there (left convention);
    /// `t = 0` resolves to the first segment. A small slack absorbs rounding
    /// in accumulated durations at `t = T`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64), SplineError> {
        if self.segments.is_empty() {
            return Err(SplineError::Empty);
        }
        let total = self.total_duration();
        let slack = 1e-9 * total.max(1.0);
        if t < -slack || t > total + slack {
            return Err(SplineError::OutOfDomain { t, total });
        }
        let t = t.clamp(0.0, total);
        if t == 0.0 {
            return Ok((0, 0.0));
        }
        let mut start = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let end = start + seg.duration;
            if t <= end || i + 1 == self.segments.len() {
                return Ok((i, (t - start).clamp(0.0, seg.duration)));
            }
            start = end;
        }
        unreachable!()
    }

    /// Value and first two time derivatives at `t`.
    pub fn eval(&self, t: f64) -> Result<(Vector3<f64>, Vector3<f64>, Vector3<f64>), SplineError> {
        let (i, u) = self.locate(t)?;
        Ok(self.segments[i].eval(u))
    }

    pub fn value(&self, t: f64) -> Result<Vector3<f64>, SplineError> {
        Ok(self.eval(t)?.0)
    }

    /// Sensitivity of the value at fixed absolute time `t` to every segment
    /// duration.
    ///
    /// Segments before the containing one shift the local time (`-velocity`);
    /// the containing segment adds its in-segment stretch term; later
    /// segments have no effect. At knot times the left-segment convention of
    /// [`PhaseSpline::locate`] applies.
    pub fn duration_gradient(&self, t: f64) -> Result<Vec<Vector3<f64>>, SplineError> {
        let (m, u) = self.locate(t)?;
        let (_, vel, _) = self.segments[m].eval(u);
        let mut grad = vec![Vector3::zeros(); self.segments.len()];
        for g in grad.iter_mut().take(m) {
            *g = -vel;
        }
        grad[m] = self.segments[m].value_duration_partial(u);
        Ok(grad)
    }
}

/// Alternating stance/swing durations for one end-effector.
#[derive(Debug, Clone)]
pub struct PhaseSchedule {
    pub first: PhaseKind,
    pub durations: Vec<f64>,
}

impl PhaseSchedule {
    pub fn new(first: PhaseKind, durations: Vec<f64>) -> Self {
        PhaseSchedule { first, durations }
    }

    pub fn kind(&self, phase: usize) -> PhaseKind {
        if phase % 2 == 0 {
            self.first
        } else {
            self.first.other()
        }
    }

    pub fn n_phases(&self) -> usize {
        self.durations.len()
    }

    pub fn total(&self) -> f64 {
        self.durations.iter().sum()
    }

    pub fn count(&self, kind: PhaseKind) -> usize {
        (0..self.durations.len()).filter(|&j| self.kind(j) == kind).count()
    }

    /// Phase index, kind and local time at `t`. Phase boundaries belong to
    /// the ending phase (left-closed), matching the spline knot convention.
    pub fn phase_at(&self, t: f64) -> (usize, PhaseKind, f64) {
        let total = self.total();
        let t = t.clamp(0.0, total);
        if t == 0.0 {
            return (0, self.kind(0), 0.0);
        }
        let mut start = 0.0;
        for (j, &d) in self.durations.iter().enumerate() {
            let end = start + d;
            if t <= end || j + 1 == self.durations.len() {
                return (j, self.kind(j), (t - start).clamp(0.0, d));
            }
            start = end;
        }
        unreachable!()
    }

    /// Whether the end-effector is in contact at `t`.
    pub fn in_stance(&self, t: f64) -> bool {
        self.phase_at(t).1 == PhaseKind::Stance
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn linear_segment(v: f64, dur: f64) -> HermiteSegment {
        HermiteSegment {
            p0: Vector3::zeros(),
            v0: Vector3::new(v, 0.0, 0.0),
            p1: Vector3::new(v * dur, 0.0, 0.0),
            v1: Vector3::new(v, 0.0, 0.0),
            duration: dur,
        }
    }

    #[test]
    fn constant_segment_has_zero_derivatives() {
        let c = Vector3::new(1.0, -2.0, 0.5);
        let spline = PhaseSpline::new(vec![HermiteSegment::constant(c, 2.0)]);
        for &t in &[0.0, 0.7, 1.3, 2.0] {
            let (p, v, a) = spline.eval(t).unwrap();
            assert_eq!(p, c);
            assert_eq!(v, Vector3::zeros());
            assert_eq!(a, Vector3::zeros());
        }
    }

    #[test]
    fn midpoint_of_zero_velocity_segment() {
        // p0=0, p1=1, v0=v1=0: value at T/2 is exactly 1/2.
        let seg = HermiteSegment {
            p0: Vector3::zeros(),
            v0: Vector3::zeros(),
            p1: Vector3::new(1.0, 0.0, 0.0),
            v1: Vector3::zeros(),
            duration: 1.6,
        };
        let spline = PhaseSpline::new(vec![seg]);
        let (p, _, _) = spline.eval(0.8).unwrap();
        assert_relative_eq!(p.x, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn endpoint_acceleration_matches_closed_form() {
        let seg = HermiteSegment {
            p0: Vector3::new(0.2, 0.0, 1.0),
            v0: Vector3::new(0.4, -0.1, 0.0),
            p1: Vector3::new(1.0, 0.3, 0.8),
            v1: Vector3::new(-0.2, 0.5, 0.1),
            duration: 1.3,
        };
        let t = seg.duration;
        let (p, v, a) = seg.eval(0.0);
        assert_relative_eq!(p, seg.p0, epsilon = 1e-15);
        assert_relative_eq!(v, seg.v0, epsilon = 1e-15);
        // a(0) = 6(p1-p0)/T^2 - (4 v0 + 2 v1)/T
        let expect = (seg.p1 - seg.p0) * 6.0 / (t * t) - (seg.v0 * 4.0 + seg.v1 * 2.0) / t;
        assert_relative_eq!(a, expect, epsilon = 1e-12);
    }

    #[test]
    fn eval_outside_domain_is_error() {
        let spline = PhaseSpline::new(vec![linear_segment(1.0, 1.0)]);
        assert!(matches!(spline.eval(-0.1), Err(SplineError::OutOfDomain { .. })));
        assert!(matches!(spline.eval(1.1), Err(SplineError::OutOfDomain { .. })));
    }

    #[test]
    fn knot_evaluation_is_continuous() {
        let segs = vec![
            HermiteSegment {
                p0: Vector3::zeros(),
                v0: Vector3::new(0.3, 0.0, 0.0),
                p1: Vector3::new(1.0, 0.5, 0.0),
                v1: Vector3::new(-0.2, 0.8, 0.0),
                duration: 0.9,
            },
            HermiteSegment {
                p0: Vector3::new(1.0, 0.5, 0.0),
                v0: Vector3::new(-0.2, 0.8, 0.0),
                p1: Vector3::new(0.4, 1.0, 0.2),
                v1: Vector3::zeros(),
                duration: 1.4,
            },
        ];
        let spline = PhaseSpline::new(segs);
        let knot = 0.9;
        let (pl, vl, _) = spline.eval(knot - 1e-12).unwrap();
        let (pk, vk, _) = spline.eval(knot).unwrap();
        let (pr, vr, _) = spline.eval(knot + 1e-12).unwrap();
        assert_relative_eq!(pl, pk, epsilon = 1e-9);
        assert_relative_eq!(pk, pr, epsilon = 1e-9);
        assert_relative_eq!(vl, vk, epsilon = 1e-9);
        assert_relative_eq!(vk, vr, epsilon = 1e-9);
    }

    #[test]
    fn constant_spline_duration_gradient_is_zero() {
        let spline = PhaseSpline::new(vec![
            HermiteSegment::constant(Vector3::new(0.5, 0.5, 0.5), 1.0),
            HermiteSegment::constant(Vector3::new(0.5, 0.5, 0.5), 2.0),
        ]);
        for g in spline.duration_gradient(1.7).unwrap() {
            assert_eq!(g, Vector3::zeros());
        }
    }

    #[test]
    fn single_segment_duration_gradient_matches_symbolic() {
        // Linear spline with fixed node values: d value / d T = v*(2 s^3 - 3 s^2).
        let v = 0.8;
        let dur = 1.5;
        let spline = PhaseSpline::new(vec![linear_segment(v, dur)]);
        let t = 0.6;
        let s = t / dur;
        let expect = v * (2.0 * s.powi(3) - 3.0 * s.powi(2));
        let grad = spline.duration_gradient(t).unwrap();
        assert_relative_eq!(grad[0].x, expect, epsilon = 1e-12);
    }

    /// Finite-difference oracle for duration sensitivities: rebuild the spline
    /// with one perturbed duration and difference the values at fixed t.
    fn fd_duration_gradient(segs: &[HermiteSegment], t: f64, k: usize, h: f64) -> Vector3<f64> {
        let perturbed = |delta: f64| {
            let mut s = segs.to_vec();
            s[k].duration += delta;
            PhaseSpline::new(s)
        };
        let hi = perturbed(h).value(t).unwrap();
        let lo = perturbed(-h).value(t).unwrap();
        (hi - lo) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn duration_gradient_matches_finite_differences(
            seed in 0u64..500,
            frac in 0.05f64..0.95,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..5usize);
            let segs: Vec<HermiteSegment> = (0..n)
                .map(|_| HermiteSegment {
                    p0: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                    v0: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                    p1: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                    v1: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                    duration: rng.random_range(0.3..1.5),
                })
                .collect();
            let spline = PhaseSpline::new(segs.clone());
            let t = frac * spline.total_duration();
            // Keep clear of knots so the finite difference stays one-sided.
            let near_knot = {
                let mut acc = 0.0;
                let mut near = false;
                for s in &segs {
                    acc += s.duration;
                    if (t - acc).abs() < 1e-3 {
                        near = true;
                    }
                }
                near
            };
            prop_assume!(!near_knot && t > 1e-3);
            let grad = spline.duration_gradient(t).unwrap();
            for k in 0..segs.len() {
                let fd = fd_duration_gradient(&segs, t, k, 1e-6);
                let scale = fd.norm().max(grad[k].norm()).max(1.0);
                prop_assert!((grad[k] - fd).norm() / scale < 1e-4);
            }
        }

        #[test]
        fn eval_is_linear_in_node_parameters(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            frac in 0.0f64..1.0,
        ) {
            // Superposition: eval(a*X + b*Y) == a*eval(X) + b*eval(Y) for
            // fixed durations.
            let dur = 1.1;
            let x = HermiteSegment {
                p0: Vector3::new(0.4, -0.3, 0.1),
                v0: Vector3::new(0.2, 0.0, -0.5),
                p1: Vector3::new(-0.7, 0.9, 0.3),
                v1: Vector3::new(0.1, 0.4, 0.2),
                duration: dur,
            };
            let y = HermiteSegment {
                p0: Vector3::new(-0.2, 0.8, 0.6),
                v0: Vector3::new(0.9, -0.1, 0.0),
                p1: Vector3::new(0.3, 0.2, -0.4),
                v1: Vector3::new(-0.6, 0.0, 0.7),
                duration: dur,
            };
            let mix = HermiteSegment {
                p0: x.p0 * a + y.p0 * b,
                v0: x.v0 * a + y.v0 * b,
                p1: x.p1 * a + y.p1 * b,
                v1: x.v1 * a + y.v1 * b,
                duration: dur,
            };
            let t = frac * dur;
            let (px, vx, axx) = x.eval(t);
            let (py, vy, ay) = y.eval(t);
            let (pm, vm, am) = mix.eval(t);
            prop_assert!((pm - (px * a + py * b)).norm() < 1e-12);
            prop_assert!((vm - (vx * a + vy * b)).norm() < 1e-12);
            prop_assert!((am - (axx * a + ay * b)).norm() < 1e-11);
        }
    }

    #[test]
    fn phase_schedule_boundary_belongs_to_ending_phase() {
        let sched = PhaseSchedule::new(PhaseKind::Stance, vec![0.5, 0.3, 0.7]);
        assert_eq!(sched.phase_at(0.0).0, 0);
        assert_eq!(sched.phase_at(0.5).0, 0);
        assert_eq!(sched.phase_at(0.5 + 1e-12).0, 1);
        assert_eq!(sched.phase_at(0.8).0, 1);
        assert_eq!(sched.phase_at(1.5).0, 2);
        assert!(sched.in_stance(0.5));
        assert!(!sched.in_stance(0.6));
    }
}
