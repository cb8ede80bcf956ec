//! Deterministic builders for the evaluation terrains: stairs, the
//! procedural track, wavy steps, and the mixed track with slit and Perlin
//! segments.
//!
//! Every builder is a pure function of a seed plus a parameter struct whose
//! defaults match the source ranges; the sampled geometry is returned
//! alongside the rasterized height field so range audits and physics
//! exports need no re-derivation. Box obstacles rasterize their top faces
//! exactly (plane equations), including under pitch/roll rotations.

mod mixed;
mod procedural;
mod stairs;
mod wavy;

pub use mixed::{
    build_mixed, build_perlin_segment, plan_mixed, MixedGeometry, MixedTrack, MixedTrackParams,
    PerlinParams, SegmentDetail, SegmentKind, SegmentSpec, TrackSpec,
};
pub use procedural::{build_procedural_track, ProceduralTrack, ProceduralTrackParams};
pub use stairs::{build_stairs, plan_stairs, StairStep, StairsGeometry, StairsParams, StairsTrack};
pub use wavy::{
    build_wavy_steps, plan_wavy_steps, sine_elevation, WavyGeometry, WavyPair, WavyStepsParams,
    WavyTrack,
};

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::heightfield::HeightField;
use crate::math;

/// Grid resolution all tracks rasterize at, m.
pub const RASTER_CELL: f64 = 0.02;

/// A box obstacle: solid cuboid, optionally rotated about its center by
/// roll (x) then pitch (y): `R = Rx(roll) * Ry(pitch)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleBox {
    pub center: Vector3<f64>,
    /// Half extents along the box's local x (length), y (width), z (height).
    pub half_extents: Vector3<f64>,
    pub roll: f64,
    pub pitch: f64,
}

impl ObstacleBox {
    pub fn rotation(&self) -> Matrix3<f64> {
        math::rot_x(self.roll) * math::rot_y(self.pitch)
    }

    /// Height of the box's top face above the world point `(x, y)`, or
    /// `None` when the point is outside the face's footprint.
    ///
    /// The top face is the rotated rectangle `c + R (u, v, hz)` with
    /// `|u| <= hx`, `|v| <= hy`; its xy projection is inverted exactly, so
    /// the rasterized surface is the true plane of the face.
    pub fn top_height_at(&self, x: f64, y: f64) -> Option<f64> {
        let r = self.rotation();
        let h = self.half_extents;
        // (x, y) - center_xy = A (u, v) + hz * (r02, r12)
        let dx = x - self.center.x - h.z * r[(0, 2)];
        let dy = y - self.center.y - h.z * r[(1, 2)];
        let det = r[(0, 0)] * r[(1, 1)] - r[(0, 1)] * r[(1, 0)];
        if det.abs() < 1e-12 {
            return None;
        }
        let u = (r[(1, 1)] * dx - r[(0, 1)] * dy) / det;
        let v = (r[(0, 0)] * dy - r[(1, 0)] * dx) / det;
        if u.abs() > h.x || v.abs() > h.y {
            return None;
        }
        Some(self.center.z + r[(2, 0)] * u + r[(2, 1)] * v + r[(2, 2)] * h.z)
    }

    /// Conservative x-interval of the top-face footprint, for raster
    /// prefiltering.
    fn x_span(&self) -> (f64, f64) {
        let reach = self.half_extents.x + self.half_extents.z;
        (self.center.x - reach, self.center.x + reach)
    }
}

/// Box list as a text table (one row per box: center, half extents, roll,
/// pitch), for consumption by physics engines that want exact solids rather
/// than the rasterized surface.
pub fn render_box_list(boxes: &[ObstacleBox]) -> String {
    let mut out =
        String::from("# center_x center_y center_z half_x half_y half_z roll pitch\n");
    for b in boxes {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            b.center.x,
            b.center.y,
            b.center.z,
            b.half_extents.x,
            b.half_extents.y,
            b.half_extents.z,
            b.roll,
            b.pitch
        ));
    }
    out
}

/// Parse a table written by [`render_box_list`].
pub fn parse_box_list(text: &str) -> Result<Vec<ObstacleBox>, String> {
    let mut boxes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<_, _>>()?;
        if values.len() != 8 {
            return Err(format!("line {}: expected 8 fields, found {}", i + 1, values.len()));
        }
        boxes.push(ObstacleBox {
            center: Vector3::new(values[0], values[1], values[2]),
            half_extents: Vector3::new(values[3], values[4], values[5]),
            roll: values[6],
            pitch: values[7],
        });
    }
    Ok(boxes)
}

/// Sample a uniform value from a closed parameter interval; degenerate
/// intervals (used by tests to pin parameters) return the endpoint.
fn sample_range<R: rand::Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

/// Rasterize a track surface `height(x, y)` onto the common 2 cm grid.
/// The track frame runs x in `[0, length]`, y in `[-width/2, width/2]`.
fn rasterize_track<F: FnMut(f64, f64) -> f64>(
    length: f64,
    width: f64,
    mut height: F,
) -> HeightField {
    let cols = (length / RASTER_CELL).round() as usize + 1;
    let rows = (width / RASTER_CELL).round() as usize + 1;
    let mut heights = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        let y = -width / 2.0 + row as f64 * RASTER_CELL;
        for col in 0..cols {
            let x = col as f64 * RASTER_CELL;
            heights.push(height(x, y));
        }
    }
    HeightField::new(Vector2::new(0.0, -width / 2.0), RASTER_CELL, rows, cols, heights)
        .expect("track surfaces are finite and non-negative")
}

/// Highest covering box top over `(x, y)`, else the ground height.
/// `spans` must hold the precomputed x-intervals of `boxes`.
fn boxes_surface(boxes: &[ObstacleBox], spans: &[(f64, f64)], x: f64, y: f64, ground: f64) -> f64 {
    let mut best = ground;
    for (b, span) in boxes.iter().zip(spans) {
        if x < span.0 || x > span.1 {
            continue;
        }
        if let Some(top) = b.top_height_at(x, y) {
            if top > best {
                best = top;
            }
        }
    }
    best
}

fn x_spans(boxes: &[ObstacleBox]) -> Vec<(f64, f64)> {
    boxes.iter().map(|b| b.x_span()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn box_list_round_trips() {
        let boxes = vec![
            ObstacleBox {
                center: Vector3::new(0.45, 0.3, 1.36),
                half_extents: Vector3::new(0.2, 0.15, 0.36),
                roll: 0.01,
                pitch: -0.02,
            },
            ObstacleBox {
                center: Vector3::new(1.0, -0.25, 0.05),
                half_extents: Vector3::new(0.125, 0.125, 0.05),
                roll: 0.0,
                pitch: 0.0,
            },
        ];
        let text = render_box_list(&boxes);
        assert_eq!(parse_box_list(&text).unwrap(), boxes);
        assert!(parse_box_list("1 2 3").is_err());
    }

    #[test]
    fn flat_box_top_is_exact() {
        let b = ObstacleBox {
            center: Vector3::new(1.0, 0.0, 0.36),
            half_extents: Vector3::new(0.2, 0.15, 0.36),
            roll: 0.0,
            pitch: 0.0,
        };
        assert_eq!(b.top_height_at(1.0, 0.0), Some(0.72));
        assert_eq!(b.top_height_at(1.19, 0.14), Some(0.72));
        assert_eq!(b.top_height_at(1.21, 0.0), None);
        assert_eq!(b.top_height_at(1.0, 0.16), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        /// Points constructed on the rotated top face are recovered by the
        /// inverse projection with the same height.
        #[test]
        fn top_face_inversion_round_trips(
            roll in -0.15f64..0.15,
            pitch in -0.15f64..0.15,
            u in -1.0f64..1.0,
            v in -1.0f64..1.0,
            hx in 0.1f64..0.25,
            hy in 0.15f64..0.3,
        ) {
            let b = ObstacleBox {
                center: Vector3::new(2.0, 0.1, 0.4),
                half_extents: Vector3::new(hx, hy, 0.36),
                roll,
                pitch,
            };
            let p = b.center + b.rotation() * Vector3::new(u * hx, v * hy, 0.36);
            let top = b.top_height_at(p.x, p.y);
            prop_assert!(top.is_some());
            prop_assert!((top.unwrap() - p.z).abs() < 1e-12);
        }

        /// Points clearly outside the face footprint are rejected.
        #[test]
        fn far_points_miss_the_face(roll in -0.15f64..0.15, pitch in -0.15f64..0.15) {
            let b = ObstacleBox {
                center: Vector3::new(0.0, 0.0, 0.4),
                half_extents: Vector3::new(0.2, 0.2, 0.36),
                roll,
                pitch,
            };
            prop_assert!(b.top_height_at(1.0, 0.0).is_none());
            prop_assert!(b.top_height_at(0.0, -1.0).is_none());
        }
    }
}
