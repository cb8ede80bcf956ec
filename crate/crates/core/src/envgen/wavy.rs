//! Wavy steps: an elevated corridor of box pairs with randomized geometry
//! and a sinusoidal elevation profile.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{boxes_surface, rasterize_track, sample_range, x_spans, ObstacleBox};
use crate::heightfield::HeightField;

#[derive(Debug, Clone)]
pub struct WavyStepsParams {
    pub n_pairs: usize,
    /// Lateral clearance between the two boxes of a pair, m.
    pub lateral_sep_range: (f64, f64),
    /// Per-box vertical offset, m.
    pub vert_offset_range: (f64, f64),
    /// Per-box longitudinal offset, m.
    pub long_offset_range: (f64, f64),
    /// Longitudinal gap between consecutive pairs, m.
    pub gap_range: (f64, f64),
    /// Step length (shared by a pair), m.
    pub length_range: (f64, f64),
    /// Per-box step width, m.
    pub width_range: (f64, f64),
    /// Solid box height, m.
    pub box_height: f64,
    /// Per-box pitch and roll, rad.
    pub rotation_range: (f64, f64),
    /// Add the sinusoidal elevation profile.
    pub with_sine: bool,
    /// Elevation of the nominal step base above the pit floor, m. The sine
    /// profile dips a full meter below the nominal line, so this keeps all
    /// step surfaces above the height-field zero plane.
    pub base_elevation: f64,
    pub width: f64,
}

impl Default for WavyStepsParams {
    fn default() -> Self {
        WavyStepsParams {
            n_pairs: 24,
            lateral_sep_range: (0.10, 0.15),
            vert_offset_range: (-0.05, 0.05),
            long_offset_range: (-0.05, 0.05),
            gap_range: (0.15, 0.20),
            length_range: (0.20, 0.40),
            width_range: (0.30, 0.60),
            box_height: 0.72,
            rotation_range: (-0.15, 0.15),
            with_sine: true,
            base_elevation: 1.1,
            width: 2.0,
        }
    }
}

/// Raw parameter draws of one box pair, kept for range audits.
#[derive(Debug, Clone, PartialEq)]
pub struct WavyPair {
    /// Longitudinal center of the pair before per-box offsets, m.
    pub center_x: f64,
    pub gap: f64,
    pub length: f64,
    pub lateral_sep: f64,
    /// Left, right box samples.
    pub widths: [f64; 2],
    pub vert_offsets: [f64; 2],
    pub long_offsets: [f64; 2],
    pub pitches: [f64; 2],
    pub rolls: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavyGeometry {
    pub pairs: Vec<WavyPair>,
    pub boxes: Vec<ObstacleBox>,
    pub length: f64,
    pub width: f64,
}

/// Sampled geometry plus the rasterized surface.
#[derive(Debug, Clone, PartialEq)]
pub struct WavyTrack {
    pub pairs: Vec<WavyPair>,
    pub boxes: Vec<ObstacleBox>,
    pub length: f64,
    pub width: f64,
    pub field: HeightField,
}

/// Sinusoidal elevation added to the step heights, with `x` the
/// longitudinal distance in meters. Exactly zero at x = 6.
pub fn sine_elevation(x: f64) -> f64 {
    ((x - 6.0) / 3.0).sin()
}

/// Sample the wavy-steps geometry for `seed` without rasterizing.
///
/// Pairs advance as gap + length; each pair draws one length and lateral
/// separation, and each of its two boxes draws width, vertical and
/// longitudinal offsets, pitch and roll. Box tops sit at
/// `base_elevation + box_height + vertical offset (+ sine)`.
pub fn plan_wavy_steps(seed: u64, params: &WavyStepsParams) -> WavyGeometry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(params.n_pairs);
    let mut boxes = Vec::with_capacity(params.n_pairs * 2);
    let mut cursor = 0.0f64;
    for _ in 0..params.n_pairs {
        let gap = sample_range(&mut rng, params.gap_range);
        let length = sample_range(&mut rng, params.length_range);
        let lateral_sep = sample_range(&mut rng, params.lateral_sep_range);
        let center_x = cursor + gap + length / 2.0;
        cursor += gap + length;

        let mut pair = WavyPair {
            center_x,
            gap,
            length,
            lateral_sep,
            widths: [0.0; 2],
            vert_offsets: [0.0; 2],
            long_offsets: [0.0; 2],
            pitches: [0.0; 2],
            rolls: [0.0; 2],
        };
        for (i, side) in [1.0f64, -1.0].into_iter().enumerate() {
            let width = sample_range(&mut rng, params.width_range);
            let dz = sample_range(&mut rng, params.vert_offset_range);
            let dx = sample_range(&mut rng, params.long_offset_range);
            let pitch = sample_range(&mut rng, params.rotation_range);
            let roll = sample_range(&mut rng, params.rotation_range);
            pair.widths[i] = width;
            pair.vert_offsets[i] = dz;
            pair.long_offsets[i] = dx;
            pair.pitches[i] = pitch;
            pair.rolls[i] = roll;

            let bx = center_x + dx;
            let mut top = params.base_elevation + params.box_height + dz;
            if params.with_sine {
                top += sine_elevation(bx);
            }
            boxes.push(ObstacleBox {
                center: Vector3::new(
                    bx,
                    side * (lateral_sep / 2.0 + width / 2.0),
                    top - params.box_height / 2.0,
                ),
                half_extents: Vector3::new(length / 2.0, width / 2.0, params.box_height / 2.0),
                roll,
                pitch,
            });
        }
        pairs.push(pair);
    }
    // Trailing gap so the last pair is not flush with the track end.
    let length = cursor + 0.2;
    WavyGeometry { pairs, boxes, length, width: params.width }
}

/// Build the wavy-steps track for `seed`. The pit floor rasterizes at 0;
/// the walking surface is the exact top-face planes of the boxes.
pub fn build_wavy_steps(seed: u64, params: &WavyStepsParams) -> WavyTrack {
    let geometry = plan_wavy_steps(seed, params);
    let spans = x_spans(&geometry.boxes);
    let field = rasterize_track(geometry.length, geometry.width, |x, y| {
        boxes_surface(&geometry.boxes, &spans, x, y, 0.0)
    });
    WavyTrack {
        pairs: geometry.pairs,
        boxes: geometry.boxes,
        length: geometry.length,
        width: geometry.width,
        field,
    }
}
