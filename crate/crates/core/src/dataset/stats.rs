//! Dataset summary statistics: contact-onset scatter and velocity traces.
//!
//! These are the two views used to eyeball a generated dataset — where the
//! feet land on the terrain strip, and how the commanded forward speed is
//! realized over each clip.

use super::{DatasetError, TrajectoryClip};
use crate::robot::N_LEGS;

/// Aggregate statistics over a set of clips.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    /// World (x, y) of every contact onset with x ≤ `onset_x_limit`, pooled
    /// over all clips and legs in input order.
    pub onsets: Vec<(f64, f64)>,
    /// Onset x cutoff (the interesting strip ahead of the start).
    pub onset_x_limit: f64,
    /// Per clip: (t, vx) at every frame.
    pub velocity_traces: Vec<Vec<(f64, f64)>>,
    pub clips: usize,
    pub frames: usize,
}

/// Default onset cutoff: the strip covered by the terrain image.
pub const ONSET_X_LIMIT: f64 = 1.75;

/// Pool contact-onset positions and forward-velocity traces over `clips`.
///
/// An onset is a frame where a leg's contact flag rises (the first frame
/// counts if it starts in contact); its position is that leg's end-effector
/// location at the onset frame. Onsets beyond x = 1.75 m are dropped.
pub fn dataset_stats(clips: &[TrajectoryClip]) -> Result<DatasetStats, DatasetError> {
    if clips.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let mut onsets = Vec::new();
    let mut velocity_traces = Vec::with_capacity(clips.len());
    let mut frames = 0;
    for clip in clips {
        clip.validate()?;
        frames += clip.frames();
        for leg in 0..N_LEGS {
            for k in clip.contact_onsets(leg) {
                let p = clip.ee_pos[k][leg];
                let (x, y) = (p[0] as f64, p[1] as f64);
                if x <= ONSET_X_LIMIT {
                    onsets.push((x, y));
                }
            }
        }
        let trace = (0..clip.frames())
            .map(|k| (clip.frame_time(k), clip.com_linvel[k][0] as f64))
            .collect();
        velocity_traces.push(trace);
    }
    Ok(DatasetStats {
        onsets,
        onset_x_limit: ONSET_X_LIMIT,
        velocity_traces,
        clips: clips.len(),
        frames,
    })
}

impl DatasetStats {
    /// Mean forward velocity over all frames of all clips.
    pub fn mean_forward_velocity(&self) -> f64 {
        let (sum, n) = self
            .velocity_traces
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, n), &(_, vx)| (s + vx, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Onset scatter as TSV: header then one `x<TAB>y` row per onset.
pub fn render_onset_table(stats: &DatasetStats) -> String {
    let mut out = String::from("x\ty\n");
    for &(x, y) in &stats.onsets {
        out.push_str(&format!("{x}\t{y}\n"));
    }
    out
}

/// Velocity traces as TSV: `clip<TAB>t<TAB>vx` rows.
pub fn render_velocity_table(stats: &DatasetStats) -> String {
    let mut out = String::from("clip\tt\tvx\n");
    for (i, trace) in stats.velocity_traces.iter().enumerate() {
        for &(t, vx) in trace {
            out.push_str(&format!("{i}\t{t}\t{vx}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::sample_clip;
    use super::*;
    use crate::heightfield::HeightField;
    use crate::nlp::{SolveReport, SolveStatus};
    use crate::planner::CentroidalSolution;
    use crate::robot::RobotModel;
    use crate::spline::{HermiteSegment, PhaseKind, PhaseSpline};
    use nalgebra::{Vector2, Vector3};

    fn converged() -> SolveReport {
        SolveReport {
            status: SolveStatus::Converged,
            max_violation: 0.0,
            initial_violation: 0.0,
            outer_iterations: 0,
            inner_iterations: 0,
            wall_time_s: 0.0,
        }
    }

    fn hold(p: Vector3<f64>, horizon: f64) -> PhaseSpline {
        PhaseSpline::with_tags(
            vec![HermiteSegment::constant(p, horizon)],
            vec![PhaseKind::Stance],
        )
    }

    fn standing_clip(horizon: f64) -> super::super::TrajectoryClip {
        let model = RobotModel::default();
        let com = Vector3::new(0.0, 0.0, model.nominal_stance_depth);
        let feet = model.nominal_feet_base();
        let solution = CentroidalSolution {
            horizon,
            com_pos: hold(com, horizon),
            com_ang: hold(Vector3::zeros(), horizon),
            ee: std::array::from_fn(|leg| hold(com + feet[leg], horizon)),
            force: std::array::from_fn(|_| hold(Vector3::zeros(), horizon)),
            report: converged(),
        };
        let terrain = HeightField::flat(Vector2::new(-2.0, -2.0), 0.25, 17, 17, 0.0).unwrap();
        sample_clip(&solution, &terrain, &model).unwrap()
    }

    #[test]
    fn standing_clip_yields_one_onset_per_foot_at_the_footprint() {
        let clip = standing_clip(0.6);
        let stats = dataset_stats(std::slice::from_ref(&clip)).unwrap();
        assert_eq!(stats.onsets.len(), N_LEGS);
        let model = RobotModel::default();
        let feet = model.nominal_feet_base();
        for leg in 0..N_LEGS {
            let (x, y) = stats.onsets[leg];
            assert!((x - feet[leg].x).abs() < 1e-6);
            assert!((y - feet[leg].y).abs() < 1e-6);
        }
        assert_eq!(stats.clips, 1);
        assert_eq!(stats.frames, clip.frames());
    }

    #[test]
    fn onsets_beyond_the_strip_are_dropped() {
        let mut clip = standing_clip(0.3);
        // Teleport one foot's onset past the cutoff.
        clip.ee_pos[0][2][0] = 2.5;
        let stats = dataset_stats(std::slice::from_ref(&clip)).unwrap();
        assert_eq!(stats.onsets.len(), N_LEGS - 1);
    }

    #[test]
    fn onset_rows_match_brute_force_transition_count() {
        let mut clip = standing_clip(0.5);
        // Fabricate a swing window for two legs.
        for k in 10..20 {
            clip.contact_flags[k][1] = false;
        }
        for k in 30..35 {
            clip.contact_flags[k][3] = false;
        }
        let clips = [clip.clone(), standing_clip(0.3)];
        let stats = dataset_stats(&clips).unwrap();
        let mut brute = 0;
        for c in &clips {
            for leg in 0..N_LEGS {
                let mut prev = false;
                for flags in &c.contact_flags {
                    if flags[leg] && !prev {
                        brute += 1;
                    }
                    prev = flags[leg];
                }
            }
        }
        assert_eq!(stats.onsets.len(), brute);
        let table = render_onset_table(&stats);
        assert_eq!(table.lines().count(), brute + 1);
        assert!(table.starts_with("x\ty\n"));
    }

    #[test]
    fn velocity_trace_reports_the_linvel_channel_on_the_frame_clock() {
        let clip = standing_clip(0.4);
        let stats = dataset_stats(std::slice::from_ref(&clip)).unwrap();
        assert_eq!(stats.velocity_traces.len(), 1);
        let trace = &stats.velocity_traces[0];
        assert_eq!(trace.len(), clip.frames());
        assert_eq!(trace[0], (0.0, 0.0));
        assert!((trace.last().unwrap().0 - 0.4).abs() < 1e-12);
        assert_eq!(stats.mean_forward_velocity(), 0.0);
        let tsv = render_velocity_table(&stats);
        assert_eq!(tsv.lines().count(), clip.frames() + 1);
        assert!(tsv.starts_with("clip\tt\tvx\n"));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(dataset_stats(&[]), Err(DatasetError::EmptyDataset)));
    }
}
