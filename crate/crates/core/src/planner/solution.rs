//! Planned trajectory: spline bundle plus the solve report.

use crate::nlp::SolveReport;
use crate::robot::N_LEGS;
use crate::spline::{PhaseKind, PhaseSchedule, PhaseSpline};

/// One solved trajectory-optimization problem.
///
/// All channels share the time axis `[0, horizon]`. End-effector and force
/// splines carry stance/swing tags per segment; the contact schedule is
/// recovered by merging adjacent segments of equal tag (swing phases span two
/// segments, stance force phases three).
#[derive(Debug, Clone)]
pub struct CentroidalSolution {
    pub horizon: f64,
    pub com_pos: PhaseSpline,
    pub com_ang: PhaseSpline,
    pub ee: [PhaseSpline; N_LEGS],
    pub force: [PhaseSpline; N_LEGS],
    pub report: SolveReport,
}

impl CentroidalSolution {
    /// Contact schedule of one leg, recovered from the end-effector tags.
    pub fn schedule(&self, leg: usize) -> PhaseSchedule {
        let spline = &self.ee[leg];
        let mut durations: Vec<f64> = Vec::new();
        let mut kinds: Vec<PhaseKind> = Vec::new();
        for (seg, &tag) in spline.segments().iter().zip(spline.phase_tags()) {
            if kinds.last() == Some(&tag) {
                *durations.last_mut().unwrap() += seg.duration;
            } else {
                kinds.push(tag);
                durations.push(seg.duration);
            }
        }
        let first = kinds.first().copied().unwrap_or(PhaseKind::Stance);
        PhaseSchedule::new(first, durations)
    }

    /// Whether `leg` is in contact at `t`.
    pub fn in_stance(&self, leg: usize, t: f64) -> bool {
        self.schedule(leg).in_stance(t)
    }
}
