//! Stairs with box obstacles scattered on the steps.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{boxes_surface, rasterize_track, sample_range, x_spans, ObstacleBox};
use crate::heightfield::HeightField;

#[derive(Debug, Clone)]
pub struct StairsParams {
    pub n_steps: usize,
    /// Flat run-up before the first step, m.
    pub lead_in: f64,
    /// Per-step rise distribution, m.
    pub step_height_range: (f64, f64),
    /// Per-step tread length distribution, m.
    pub step_length_range: (f64, f64),
    /// Per-episode bound on how far apart a step's boxes may scatter, m.
    pub spread_range: (f64, f64),
    pub boxes_per_step: usize,
    /// Box footprint side, m (the source leaves it unstated).
    pub box_side: f64,
    /// When set, steps may descend as well as ascend (never below grade);
    /// the default is a monotone ascent.
    pub mixed_ascent: bool,
    pub width: f64,
}

impl Default for StairsParams {
    fn default() -> Self {
        StairsParams {
            n_steps: 10,
            lead_in: 1.0,
            step_height_range: (0.0, 0.10),
            step_length_range: (0.10, 0.75),
            spread_range: (0.0, 1.0),
            boxes_per_step: 3,
            box_side: 0.25,
            mixed_ascent: false,
            width: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StairStep {
    pub x_start: f64,
    pub length: f64,
    /// Signed elevation change onto this step, m.
    pub rise: f64,
    /// Absolute tread elevation, m.
    pub top: f64,
}

/// Sampled stairs geometry plus its raster.
#[derive(Debug, Clone, PartialEq)]
pub struct StairsTrack {
    pub steps: Vec<StairStep>,
    pub boxes: Vec<ObstacleBox>,
    /// The episode's box-scatter bound, m.
    pub spread: f64,
    pub length: f64,
    pub width: f64,
    pub field: HeightField,
}

/// Geometry of [`StairsTrack`] before rasterization; cheap enough for bulk
/// parameter audits.
#[derive(Debug, Clone, PartialEq)]
pub struct StairsGeometry {
    pub steps: Vec<StairStep>,
    pub boxes: Vec<ObstacleBox>,
    pub spread: f64,
    pub length: f64,
    pub width: f64,
}

/// Sample the stairs geometry for `seed` without rasterizing.
///
/// Draw order is fixed (spread, then per step: rise, length, then the
/// boxes), so geometries are reproducible per seed. Box positions cluster
/// inside a per-step cell of side `spread`; boxes whose footprints overlap
/// are repeatedly offset by exactly 0.05 m along x until disjoint.
pub fn plan_stairs(seed: u64, params: &StairsParams) -> StairsGeometry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = sample_range(&mut rng, params.spread_range);

    let mut steps = Vec::with_capacity(params.n_steps);
    let mut x = params.lead_in;
    let mut top = 0.0f64;
    for _ in 0..params.n_steps {
        let mut rise = sample_range(&mut rng, params.step_height_range);
        if params.mixed_ascent && rng.random_bool(0.5) {
            rise = -rise;
        }
        // Steps never descend below grade.
        rise = rise.max(-top);
        top += rise;
        let length = sample_range(&mut rng, params.step_length_range);
        steps.push(StairStep { x_start: x, length, rise, top });
        x += length;
    }
    let length = x;

    let mut boxes = Vec::with_capacity(params.n_steps * params.boxes_per_step);
    let half = params.box_side / 2.0;
    for step in &steps {
        let x_lo = step.x_start + half.min(step.length / 2.0);
        let x_hi = (step.x_start + step.length - half).max(x_lo);
        let y_hi = (params.width / 2.0 - half).max(0.0);
        let cx = sample_range(&mut rng, (x_lo, x_hi));
        let cy = sample_range(&mut rng, (-y_hi, y_hi));
        for _ in 0..params.boxes_per_step {
            let bx = sample_range(&mut rng, (-spread / 2.0, spread / 2.0));
            let by = sample_range(&mut rng, (-spread / 2.0, spread / 2.0));
            let height = sample_range(&mut rng, params.step_height_range);
            boxes.push(ObstacleBox {
                center: Vector3::new(
                    (cx + bx).clamp(x_lo, x_hi),
                    (cy + by).clamp(-y_hi, y_hi),
                    step.top + height / 2.0,
                ),
                half_extents: Vector3::new(half, half, height / 2.0),
                roll: 0.0,
                pitch: 0.0,
            });
        }
    }
    resolve_overlaps(&mut boxes);

    StairsGeometry { steps, boxes, spread, length, width: params.width }
}

/// Shift overlapping boxes apart: whenever two footprints intersect, the
/// later box moves +0.05 m along x; repeated until disjoint.
fn resolve_overlaps(boxes: &mut [ObstacleBox]) {
    for _ in 0..1000 {
        let mut moved = false;
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if footprints_overlap(&boxes[i], &boxes[j]) {
                    boxes[j].center.x += 0.05;
                    moved = true;
                }
            }
        }
        if !moved {
            return;
        }
    }
    unreachable!("overlap resolution failed to terminate");
}

fn footprints_overlap(a: &ObstacleBox, b: &ObstacleBox) -> bool {
    (a.center.x - b.center.x).abs() < a.half_extents.x + b.half_extents.x
        && (a.center.y - b.center.y).abs() < a.half_extents.y + b.half_extents.y
}

/// Tread elevation of the staircase at longitudinal position `x` (boxes
/// excluded).
pub(crate) fn tread_height(steps: &[StairStep], x: f64) -> f64 {
    let mut top = 0.0;
    for step in steps {
        if x < step.x_start {
            return top;
        }
        top = step.top;
        if x < step.x_start + step.length {
            return top;
        }
    }
    top
}

/// Build the stairs track for `seed`: sampled steps, obstacle boxes and the
/// rasterized surface.
pub fn build_stairs(seed: u64, params: &StairsParams) -> StairsTrack {
    let geometry = plan_stairs(seed, params);
    let spans = x_spans(&geometry.boxes);
    let field = rasterize_track(geometry.length, geometry.width, |x, y| {
        let ground = tread_height(&geometry.steps, x);
        boxes_surface(&geometry.boxes, &spans, x, y, ground)
    });
    StairsTrack {
        steps: geometry.steps,
        boxes: geometry.boxes,
        spread: geometry.spread,
        length: geometry.length,
        width: geometry.width,
        field,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn thousand_seed_parameter_audit() {
        let params = StairsParams::default();
        for seed in 0..1000 {
            let g = plan_stairs(seed, &params);
            assert_eq!(g.steps.len(), params.n_steps);
            assert_eq!(g.boxes.len(), params.n_steps * params.boxes_per_step);
            assert!((0.0..=1.0).contains(&g.spread), "seed {seed}: spread {}", g.spread);
            let mut prev_top = 0.0;
            for step in &g.steps {
                assert!((0.0..=0.10).contains(&step.rise), "seed {seed}: rise {}", step.rise);
                assert!(
                    (0.10..=0.75).contains(&step.length),
                    "seed {seed}: length {}",
                    step.length
                );
                // Default build ascends monotonically.
                assert!(step.top >= prev_top - 1e-12);
                prev_top = step.top;
            }
            for b in &g.boxes {
                let h = b.half_extents.z * 2.0;
                assert!((0.0..=0.10).contains(&h), "seed {seed}: box height {h}");
                assert!(b.center.y.abs() <= g.width / 2.0);
            }
        }
    }

    #[test]
    fn deterministic_per_seed_and_distinct_across_seeds() {
        let params = StairsParams::default();
        assert_eq!(plan_stairs(42, &params), plan_stairs(42, &params));
        assert_ne!(plan_stairs(42, &params), plan_stairs(43, &params));
        let a = build_stairs(7, &params);
        let b = build_stairs(7, &params);
        assert_eq!(a.field, b.field);
    }

    #[test]
    fn zero_heights_give_a_flat_staircase_with_boxes_still_placed() {
        let params = StairsParams { step_height_range: (0.0, 0.0), ..StairsParams::default() };
        let track = build_stairs(5, &params);
        assert_eq!(track.field.max_height(), 0.0);
        assert_eq!(track.boxes.len(), 30);
        for b in &track.boxes {
            assert_eq!(b.half_extents.z, 0.0);
        }
    }

    #[test]
    fn forced_overlap_applies_exact_fivecm_offsets() {
        // Two narrow boxes piled onto one spot separate with a single
        // exact 0.05 m offset.
        let params = StairsParams {
            spread_range: (0.0, 0.0),
            n_steps: 1,
            lead_in: 0.0,
            step_length_range: (0.75, 0.75),
            boxes_per_step: 2,
            box_side: 0.04,
            ..StairsParams::default()
        };
        let g = plan_stairs(11, &params);
        assert_eq!(g.boxes.len(), 2);
        let dx = g.boxes[1].center.x - g.boxes[0].center.x;
        // One 0.05 m shift, measured to representation accuracy.
        assert!((dx - 0.05).abs() < 1e-15, "expected one 0.05 m offset, got {dx}");
        assert!(!footprints_overlap(&g.boxes[0], &g.boxes[1]));
    }

    #[test]
    fn piled_wide_boxes_fan_out_in_fivecm_quanta_until_disjoint() {
        // Default 0.25 m boxes piled on one spot need several passes; every
        // displacement stays an exact multiple of 0.05 m and the final
        // footprints are disjoint.
        let params = StairsParams {
            spread_range: (0.0, 0.0),
            n_steps: 1,
            lead_in: 0.0,
            step_length_range: (0.75, 0.75),
            ..StairsParams::default()
        };
        let g = plan_stairs(11, &params);
        assert_eq!(g.boxes.len(), 3);
        let base = g.boxes[0].center.x;
        for b in &g.boxes {
            let off = b.center.x - base;
            let quanta = off / 0.05;
            assert!(
                (quanta - quanta.round()).abs() < 1e-9 && off >= 0.0,
                "displacement {off} is not a 0.05 m multiple"
            );
        }
        for i in 0..g.boxes.len() {
            for j in i + 1..g.boxes.len() {
                assert!(!footprints_overlap(&g.boxes[i], &g.boxes[j]));
            }
        }
    }

    #[test]
    fn raster_matches_the_step_profile() {
        let params = StairsParams::default();
        let track = build_stairs(3, &params);
        // Lead-in is flat at grade.
        assert_eq!(track.field.height_at_clamped(Vector2::new(0.1, 0.0)), 0.0);
        // Probe mid-tread, where every grid vertex under the interpolation
        // stencil lies on the tread: the surface is at least the tread
        // height (boxes only raise it).
        for step in &track.steps {
            let x = step.x_start + step.length / 2.0;
            let h = track.field.height_at_clamped(Vector2::new(x, 0.0));
            assert!(h >= step.top - 1e-9, "tread at {x} is {h}, expected >= {}", step.top);
        }
        // Somewhere a box raises the surface above its tread.
        let raised = track.boxes.iter().any(|b| {
            let h = track.field.height_at_clamped(Vector2::new(b.center.x, b.center.y));
            h > tread_height(&track.steps, b.center.x) + 1e-6
        });
        assert!(raised);
    }

    #[test]
    fn mixed_ascent_descends_but_never_below_grade() {
        let params = StairsParams { mixed_ascent: true, ..StairsParams::default() };
        let mut saw_descent = false;
        for seed in 0..50 {
            let g = plan_stairs(seed, &params);
            for step in &g.steps {
                assert!(step.top >= -1e-12);
                if step.rise < -1e-9 {
                    saw_descent = true;
                }
            }
        }
        assert!(saw_descent, "mixed ascent never produced a downward step in 50 seeds");
    }
}
