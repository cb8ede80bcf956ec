//! Procedural track: generated height fields joined by flat platforms.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{rasterize_track, RASTER_CELL};
use crate::heightfield::{generate_terrain, GenerateParams, HeightField};

#[derive(Debug, Clone)]
pub struct ProceduralTrackParams {
    pub n_fields: usize,
    /// Flat connector length, m.
    pub platform_length: f64,
    /// Longitudinal extent of each generated field, m.
    pub field_length: f64,
    pub width: f64,
    /// Parameters of the per-field generator.
    pub generate: GenerateParams,
}

impl Default for ProceduralTrackParams {
    fn default() -> Self {
        ProceduralTrackParams {
            n_fields: 15,
            platform_length: 3.0,
            field_length: 2.0,
            width: 2.0,
            generate: GenerateParams::default(),
        }
    }
}

/// The assembled track plus the seeds of its generated fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ProceduralTrack {
    pub field: HeightField,
    /// Seed used for each generated field, in layout order.
    pub field_seeds: Vec<u64>,
    pub length: f64,
    pub width: f64,
}

/// Build the procedural track for `seed`: `n_fields` generated height
/// fields, each preceded by a flat platform (so the track starts on flat
/// ground), rasterized onto the common 2 cm grid.
pub fn build_procedural_track(seed: u64, params: &ProceduralTrackParams) -> ProceduralTrack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field_seeds: Vec<u64> = (0..params.n_fields).map(|_| rng.random()).collect();
    let fields: Vec<HeightField> = field_seeds
        .iter()
        .map(|&s| generate_terrain(s, &params.generate))
        .collect();

    let unit = params.platform_length + params.field_length;
    let length = unit * params.n_fields as f64;
    let field = rasterize_track(length, params.width, |x, y| {
        let k = ((x / unit) as usize).min(params.n_fields - 1);
        let local = x - k as f64 * unit;
        if local < params.platform_length {
            0.0
        } else {
            // Generated fields cover [0, field_length] x [0, width] with
            // their own grid; sample them bilinearly at the track point.
            let fx = local - params.platform_length;
            fields[k].height_at_clamped(Vector2::new(fx, y + params.width / 2.0))
        }
    });
    ProceduralTrack { field, field_seeds, length, width: params.width }
}

/// Columns covered by platforms for a given track, used by tests and
/// audits: returns (start, end) x-intervals of the flat connectors.
pub fn platform_intervals(params: &ProceduralTrackParams) -> Vec<(f64, f64)> {
    let unit = params.platform_length + params.field_length;
    (0..params.n_fields)
        .map(|k| (k as f64 * unit, k as f64 * unit + params.platform_length))
        .collect()
}

#[allow(dead_code)]
fn raster_cols(length: f64) -> usize {
    (length / RASTER_CELL).round() as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_alternates_platforms_and_fields() {
        let params = ProceduralTrackParams::default();
        let track = build_procedural_track(4, &params);
        assert_eq!(track.length, 75.0);
        assert_eq!(track.field_seeds.len(), 15);
        // Platform interiors are flat at grade.
        for (start, end) in platform_intervals(&params) {
            let mid = (start + end) / 2.0;
            for y in [-0.9, 0.0, 0.7] {
                assert_eq!(track.field.height_at_clamped(Vector2::new(mid, y)), 0.0);
            }
        }
        // Field regions stay within the generator's height budget and
        // actually contain raised terrain somewhere.
        assert!(track.field.max_height() <= 0.30 + 1e-9);
        assert!(track.field.max_height() > 0.05);
    }

    #[test]
    fn source_fields_hit_the_height_budget_exactly() {
        let params = ProceduralTrackParams::default();
        let track = build_procedural_track(8, &params);
        for &s in &track.field_seeds {
            let f = generate_terrain(s, &params.generate);
            assert!((f.max_height() - params.generate.max_height).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_per_seed_and_distinct_across_seeds() {
        let params = ProceduralTrackParams::default();
        let a = build_procedural_track(1, &params);
        let b = build_procedural_track(1, &params);
        assert_eq!(a, b);
        let c = build_procedural_track(2, &params);
        assert_ne!(a.field_seeds, c.field_seeds);
    }

    #[test]
    fn track_grid_has_the_stated_resolution() {
        let params = ProceduralTrackParams {
            n_fields: 2,
            ..ProceduralTrackParams::default()
        };
        let track = build_procedural_track(0, &params);
        assert_eq!(track.field.cell_size(), RASTER_CELL);
        assert_eq!(track.field.rows(), 101);
        assert_eq!(track.field.cols(), raster_cols(10.0));
    }
}
