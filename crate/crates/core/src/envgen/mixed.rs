//! Mixed track: fifteen segments sampled from five kinds, plus the Perlin
//! and slit segment builders.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stairs::{plan_stairs, tread_height, StairStep, StairsParams};
use super::wavy::{plan_wavy_steps, WavyPair, WavyStepsParams};
use super::{boxes_surface, rasterize_track, sample_range, x_spans, ObstacleBox, RASTER_CELL};
use crate::heightfield::{generate_terrain, GenerateParams, HeightField};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Procedural,
    Stairs,
    WavySteps,
    Slits,
    Perlin,
}

impl SegmentKind {
    pub const ALL: [SegmentKind; 5] = [
        SegmentKind::Procedural,
        SegmentKind::Stairs,
        SegmentKind::WavySteps,
        SegmentKind::Slits,
        SegmentKind::Perlin,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SegmentKind::Procedural => "procedural",
            SegmentKind::Stairs => "stairs",
            SegmentKind::WavySteps => "wavy-steps",
            SegmentKind::Slits => "slits",
            SegmentKind::Perlin => "perlin",
        }
    }
}

/// One segment's place in the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpec {
    pub kind: SegmentKind,
    pub start_x: f64,
    pub length: f64,
}

/// The sampled layout of a track: contiguous segments along x.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSpec {
    pub rng_seed: u64,
    pub width: f64,
    pub total_length: f64,
    pub segments: Vec<SegmentSpec>,
}

impl TrackSpec {
    /// Check the layout invariants: segments tile `[0, total_length]`
    /// without gaps or overlaps.
    pub fn validate(&self) -> Result<(), String> {
        let mut cursor = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if (s.start_x - cursor).abs() > 1e-9 {
                return Err(format!(
                    "segment {i} starts at {} but the previous one ends at {cursor}",
                    s.start_x
                ));
            }
            if s.length <= 0.0 {
                return Err(format!("segment {i} has non-positive length {}", s.length));
            }
            cursor = s.start_x + s.length;
        }
        if (cursor - self.total_length).abs() > 1e-9 {
            return Err(format!(
                "segments end at {cursor} but total_length is {}",
                self.total_length
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PerlinParams {
    /// Number of octaves summed ("harmonics").
    pub octaves: usize,
    /// Amplitude falloff per octave.
    pub persistence: f64,
    /// Peak height after normalization, m.
    pub max_height: f64,
    /// Grid resolution, vertices per meter.
    pub vertices_per_meter: f64,
    /// Wavelength of the first octave, m.
    pub base_wavelength: f64,
}

impl Default for PerlinParams {
    fn default() -> Self {
        PerlinParams {
            octaves: 6,
            persistence: 0.5,
            max_height: 0.5,
            vertices_per_meter: 65.0,
            base_wavelength: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixedTrackParams {
    pub n_segments: usize,
    pub width: f64,
    /// Length of a procedural, wavy or Perlin segment, m.
    pub procedural_length: f64,
    pub wavy_length: f64,
    pub perlin_length: f64,
    /// Length of a slit segment, m.
    pub slit_length: f64,
    pub slit_platform_range: (f64, f64),
    pub slit_gap_range: (f64, f64),
    /// Platform top above the slit floor, m (depth is unstated upstream).
    pub slit_platform_height: f64,
    /// Steps per stairs segment.
    pub stairs_steps: usize,
    pub generate: GenerateParams,
    pub perlin: PerlinParams,
    /// Force the segment kind sequence instead of sampling it (testing and
    /// curated tracks).
    pub kinds_override: Option<Vec<SegmentKind>>,
}

impl Default for MixedTrackParams {
    fn default() -> Self {
        MixedTrackParams {
            n_segments: 15,
            width: 2.0,
            procedural_length: 4.0,
            wavy_length: 4.0,
            perlin_length: 4.0,
            slit_length: 3.0,
            slit_platform_range: (0.1, 1.0),
            slit_gap_range: (0.15, 0.20),
            slit_platform_height: 0.5,
            stairs_steps: 5,
            generate: GenerateParams::default(),
            perlin: PerlinParams::default(),
            kinds_override: None,
        }
    }
}

/// Per-segment sampled content, kept for audits and exports.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentDetail {
    /// One generated field stretched longitudinally over the segment.
    Procedural { field_seed: u64 },
    Stairs { steps: Vec<StairStep>, boxes: Vec<ObstacleBox>, spread: f64 },
    /// Wavy-steps boxes in segment-local coordinates, without the sine.
    WavySteps { pairs: Vec<WavyPair>, boxes: Vec<ObstacleBox> },
    /// Platform x-intervals (local) separated by slit gaps.
    Slits { platforms: Vec<(f64, f64)>, gaps: Vec<f64> },
    Perlin { noise_seed: u64 },
}

/// A mixed track: layout spec, per-segment details, raster.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedTrack {
    pub spec: TrackSpec,
    pub details: Vec<SegmentDetail>,
    pub field: HeightField,
}

/// Geometry of a mixed track before rasterization.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedGeometry {
    pub spec: TrackSpec,
    pub details: Vec<SegmentDetail>,
}

/// Sample the mixed-track layout and all per-segment parameters for `seed`
/// without rasterizing.
pub fn plan_mixed(seed: u64, params: &MixedTrackParams) -> MixedGeometry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments = Vec::with_capacity(params.n_segments);
    let mut details = Vec::with_capacity(params.n_segments);
    let mut cursor = 0.0f64;
    for i in 0..params.n_segments {
        let kind = match &params.kinds_override {
            Some(kinds) => kinds[i % kinds.len()],
            None => SegmentKind::ALL[rng.random_range(0..SegmentKind::ALL.len())],
        };
        let sub_seed: u64 = rng.random();
        let (length, detail) = match kind {
            SegmentKind::Procedural => (
                snap(params.procedural_length),
                SegmentDetail::Procedural { field_seed: sub_seed },
            ),
            SegmentKind::Stairs => {
                let stairs = plan_stairs(
                    sub_seed,
                    &StairsParams {
                        n_steps: params.stairs_steps,
                        lead_in: 0.0,
                        width: params.width,
                        ..StairsParams::default()
                    },
                );
                (
                    snap(stairs.length),
                    SegmentDetail::Stairs {
                        steps: stairs.steps,
                        boxes: stairs.boxes,
                        spread: stairs.spread,
                    },
                )
            }
            SegmentKind::WavySteps => {
                let wavy = plan_wavy_steps(
                    sub_seed,
                    &WavyStepsParams {
                        // Enough pairs to overfill the segment; trimmed below.
                        n_pairs: (params.wavy_length / 0.35).ceil() as usize + 2,
                        with_sine: false,
                        // Stepping stones sit on the segment floor here, not
                        // above a sine-modulated pit.
                        base_elevation: 0.0,
                        width: params.width,
                        ..WavyStepsParams::default()
                    },
                );
                let mut pairs = wavy.pairs;
                let mut boxes = wavy.boxes;
                // Keep only pairs that fit inside the segment.
                let keep = pairs
                    .iter()
                    .take_while(|p| p.center_x + p.length / 2.0 + 0.06 <= params.wavy_length)
                    .count();
                pairs.truncate(keep);
                boxes.truncate(keep * 2);
                (snap(params.wavy_length), SegmentDetail::WavySteps { pairs, boxes })
            }
            SegmentKind::Slits => {
                let mut platforms = Vec::new();
                let mut gaps = Vec::new();
                let mut x = 0.0;
                loop {
                    let platform = sample_range(&mut rng, params.slit_platform_range);
                    let end = (x + platform).min(params.slit_length);
                    platforms.push((x, end));
                    if end >= params.slit_length {
                        break;
                    }
                    let gap = sample_range(&mut rng, params.slit_gap_range);
                    gaps.push(gap);
                    x = end + gap;
                    if x >= params.slit_length {
                        break;
                    }
                }
                (snap(params.slit_length), SegmentDetail::Slits { platforms, gaps })
            }
            SegmentKind::Perlin => (
                snap(params.perlin_length),
                SegmentDetail::Perlin { noise_seed: sub_seed },
            ),
        };
        segments.push(SegmentSpec { kind, start_x: cursor, length });
        details.push(detail);
        cursor += length;
    }
    let spec = TrackSpec {
        rng_seed: seed,
        width: params.width,
        total_length: cursor,
        segments,
    };
    MixedGeometry { spec, details }
}

/// Snap a segment length onto the raster grid so segment boundaries land on
/// grid columns.
fn snap(length: f64) -> f64 {
    (length / RASTER_CELL).round().max(1.0) * RASTER_CELL
}

/// Build the mixed track for `seed`.
pub fn build_mixed(seed: u64, params: &MixedTrackParams) -> MixedTrack {
    let geometry = plan_mixed(seed, params);
    let spec = &geometry.spec;

    // Pre-render the sampled surfaces each segment needs.
    struct Renderer {
        detail_fields: Vec<Option<HeightField>>,
        spans: Vec<Vec<(f64, f64)>>,
    }
    let mut renderer = Renderer {
        detail_fields: Vec::with_capacity(spec.segments.len()),
        spans: Vec::with_capacity(spec.segments.len()),
    };
    for detail in &geometry.details {
        let (field, spans) = match detail {
            SegmentDetail::Procedural { field_seed } => {
                (Some(generate_terrain(*field_seed, &params.generate)), Vec::new())
            }
            SegmentDetail::Perlin { noise_seed } => (
                Some(build_perlin_segment(
                    *noise_seed,
                    params.perlin_length,
                    params.width,
                    &params.perlin,
                )),
                Vec::new(),
            ),
            SegmentDetail::Stairs { boxes, .. } | SegmentDetail::WavySteps { boxes, .. } => {
                (None, x_spans(boxes))
            }
            SegmentDetail::Slits { .. } => (None, Vec::new()),
        };
        renderer.detail_fields.push(field);
        renderer.spans.push(spans);
    }

    let field = rasterize_track(spec.total_length, spec.width, |x, y| {
        // Locate the owning segment (boundary columns belong to the
        // segment that starts there).
        let mut k = spec.segments.len() - 1;
        for (i, s) in spec.segments.iter().enumerate() {
            if x < s.start_x + s.length - 1e-9 {
                k = i;
                break;
            }
        }
        let s = &spec.segments[k];
        let lx = x - s.start_x;
        match &geometry.details[k] {
            SegmentDetail::Procedural { .. } => {
                let f = renderer.detail_fields[k].as_ref().unwrap();
                // One 2 m field stretched to cover the whole segment.
                let (lo, hi) = f.footprint();
                let fx = lo.x + (hi.x - lo.x) * (lx / s.length);
                f.height_at_clamped(Vector2::new(fx, y + spec.width / 2.0))
            }
            SegmentDetail::Stairs { steps, boxes, .. } => {
                let ground = tread_height(steps, lx);
                boxes_surface(boxes, &renderer.spans[k], lx, y, ground)
            }
            SegmentDetail::WavySteps { boxes, .. } => {
                boxes_surface(boxes, &renderer.spans[k], lx, y, 0.0)
            }
            SegmentDetail::Slits { platforms, .. } => {
                let on_platform = platforms.iter().any(|&(a, b)| lx >= a && lx <= b);
                if on_platform {
                    params.slit_platform_height
                } else {
                    0.0
                }
            }
            SegmentDetail::Perlin { .. } => {
                let f = renderer.detail_fields[k].as_ref().unwrap();
                f.height_at_clamped(Vector2::new(lx, y + spec.width / 2.0))
            }
        }
    });
    MixedTrack { spec: geometry.spec, details: geometry.details, field }
}

/// Gradient-lattice ("Perlin") noise field over `length x width` meters.
///
/// `octaves` harmonics are summed with amplitudes falling off by
/// `persistence`; the result is shifted and scaled so the minimum is 0 and
/// the maximum exactly `max_height`. The grid has `vertices_per_meter`
/// vertices per meter in both directions.
pub fn build_perlin_segment(
    seed: u64,
    length: f64,
    width: f64,
    params: &PerlinParams,
) -> HeightField {
    let cell = 1.0 / params.vertices_per_meter;
    let cols = (length * params.vertices_per_meter).round() as usize + 1;
    let rows = (width * params.vertices_per_meter).round() as usize + 1;
    let mut heights = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        let y = row as f64 * cell;
        for col in 0..cols {
            let x = col as f64 * cell;
            let mut value = 0.0;
            let mut amplitude = 1.0;
            for octave in 0..params.octaves {
                let freq = (1 << octave) as f64 / params.base_wavelength;
                value += amplitude * perlin2(x * freq, y * freq, seed ^ octave as u64);
                amplitude *= params.persistence;
            }
            heights.push(value);
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &h in &heights {
        lo = lo.min(h);
        hi = hi.max(h);
    }
    let scale = if hi > lo { params.max_height / (hi - lo) } else { 0.0 };
    for h in &mut heights {
        *h = (*h - lo) * scale;
    }
    HeightField::new(Vector2::new(0.0, -width / 2.0), cell, rows, cols, heights)
        .expect("normalized noise heights are finite and non-negative")
}

/// Classic 2D gradient noise: unit gradients on the integer lattice, dot
/// products with the corner offsets, quintic-fade bilinear blend. Output is
/// in roughly [-1, 1]; the caller normalizes.
fn perlin2(x: f64, y: f64, seed: u64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (i, j) = (x0 as i64, y0 as i64);
    let (fx, fy) = (x - x0, y - y0);
    let fade = |t: f64| t * t * t * (t * (6.0 * t - 15.0) + 10.0);
    let (u, v) = (fade(fx), fade(fy));
    let dot = |di: i64, dj: i64| {
        let (gx, gy) = lattice_gradient(i + di, j + dj, seed);
        gx * (fx - di as f64) + gy * (fy - dj as f64)
    };
    let bottom = dot(0, 0) + u * (dot(1, 0) - dot(0, 0));
    let top = dot(0, 1) + u * (dot(1, 1) - dot(0, 1));
    bottom + v * (top - bottom)
}

/// Deterministic unit gradient at a lattice vertex.
fn lattice_gradient(i: i64, j: i64, seed: u64) -> (f64, f64) {
    let mut bytes = [0u8; 24];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&i.to_le_bytes());
    bytes[16..].copy_from_slice(&j.to_le_bytes());
    let h = math::fnv1a(&bytes);
    let angle = (h as f64 / u64::MAX as f64) * std::f64::consts::TAU;
    (angle.cos(), angle.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perlin_segment_meets_its_stated_resolution_and_budget() {
        let params = PerlinParams::default();
        let field = build_perlin_segment(17, 4.0, 2.0, &params);
        assert!((field.cell_size() - 1.0 / 65.0).abs() < 1e-15);
        assert_eq!(field.cols(), 261);
        assert_eq!(field.rows(), 131);
        assert!((field.max_height() - 0.5).abs() < 1e-12);
        assert_eq!(field.min_height(), 0.0);
        // Determinism and seed sensitivity.
        assert_eq!(field, build_perlin_segment(17, 4.0, 2.0, &params));
        assert_ne!(field, build_perlin_segment(18, 4.0, 2.0, &params));
    }

    #[test]
    fn perlin_noise_is_smooth_at_lattice_scale() {
        // Neighboring samples at 1/65 m differ by far less than the full
        // height budget; a discontinuous hash-noise would fail this.
        let field = build_perlin_segment(3, 4.0, 2.0, &PerlinParams::default());
        let mut max_jump = 0.0f64;
        for r in 0..field.rows() {
            for c in 1..field.cols() {
                max_jump = max_jump.max((field.height(r, c) - field.height(r, c - 1)).abs());
            }
        }
        assert!(max_jump < 0.15, "neighboring cells jump by {max_jump}");
    }

    #[test]
    fn thousand_seed_layout_audit() {
        let params = MixedTrackParams::default();
        for seed in 0..1000 {
            let g = plan_mixed(seed, &params);
            g.spec.validate().unwrap();
            assert_eq!(g.spec.segments.len(), 15);
            for (s, d) in g.spec.segments.iter().zip(&g.details) {
                match d {
                    SegmentDetail::Procedural { .. } => assert_eq!(s.length, 4.0),
                    SegmentDetail::Perlin { .. } => assert_eq!(s.length, 4.0),
                    SegmentDetail::WavySteps { pairs, .. } => {
                        assert_eq!(s.length, 4.0);
                        for p in pairs {
                            assert!((0.15..=0.20).contains(&p.gap));
                            assert!((0.20..=0.40).contains(&p.length));
                            assert!(p.center_x + p.length / 2.0 <= 4.0);
                        }
                    }
                    SegmentDetail::Slits { platforms, gaps } => {
                        assert_eq!(s.length, 3.0);
                        for g in gaps {
                            assert!((0.15..=0.20).contains(g), "seed {seed}: gap {g}");
                        }
                        for (i, &(a, b)) in platforms.iter().enumerate() {
                            let len = b - a;
                            assert!(len > 0.0 && len <= 1.0 + 1e-12);
                            // Interior platforms (not truncated by the
                            // segment end) respect the lower bound too.
                            if i + 1 < platforms.len() && b < 3.0 - 1e-9 {
                                assert!(len >= 0.1 - 1e-12, "seed {seed}: platform {len}");
                            }
                        }
                    }
                    SegmentDetail::Stairs { steps, boxes, spread } => {
                        for step in steps {
                            assert!((0.0..=0.10).contains(&step.rise));
                            assert!((0.10..=0.75).contains(&step.length));
                        }
                        assert_eq!(steps.len(), 5);
                        assert_eq!(boxes.len(), 15);
                        assert!((0.0..=1.0).contains(spread));
                    }
                }
            }
        }
    }

    #[test]
    fn forced_kind_sequence_lengths_are_additive() {
        let params = MixedTrackParams {
            n_segments: 3,
            kinds_override: Some(vec![
                SegmentKind::Slits,
                SegmentKind::Perlin,
                SegmentKind::Procedural,
            ]),
            ..MixedTrackParams::default()
        };
        let track = build_mixed(5, &params);
        track.spec.validate().unwrap();
        assert_eq!(track.spec.total_length, 3.0 + 4.0 + 4.0);
        assert_eq!(
            track.spec.segments.iter().map(|s| s.kind).collect::<Vec<_>>(),
            vec![SegmentKind::Slits, SegmentKind::Perlin, SegmentKind::Procedural]
        );
    }

    #[test]
    fn slit_segments_rasterize_platforms_and_gaps() {
        let params = MixedTrackParams {
            n_segments: 1,
            kinds_override: Some(vec![SegmentKind::Slits]),
            ..MixedTrackParams::default()
        };
        let track = build_mixed(77, &params);
        let SegmentDetail::Slits { platforms, gaps } = &track.details[0] else {
            panic!("expected slits");
        };
        assert!(!gaps.is_empty());
        // Probe a platform interior and a gap interior.
        let (a, b) = platforms[0];
        let mid = (a + b) / 2.0;
        assert_eq!(track.field.height_at_clamped(Vector2::new(mid, 0.3)), 0.5);
        let gap_mid = b + gaps[0] / 2.0;
        // Gap interiors at least a cell from the edges are at floor level.
        if gaps[0] > 3.0 * RASTER_CELL {
            assert_eq!(track.field.height_at_clamped(Vector2::new(gap_mid, 0.3)), 0.0);
        }
    }

    #[test]
    fn mixed_track_is_deterministic() {
        let params = MixedTrackParams::default();
        let a = plan_mixed(123, &params);
        let b = plan_mixed(123, &params);
        assert_eq!(a, b);
        assert_ne!(a.spec, plan_mixed(124, &params).spec);
    }

    #[test]
    fn kinds_are_all_reachable() {
        let params = MixedTrackParams::default();
        let mut seen = std::collections::HashSet::new();
        for seed in 0..40 {
            for s in plan_mixed(seed, &params).spec.segments {
                seen.insert(s.kind.name());
            }
        }
        assert_eq!(seen.len(), 5, "saw kinds {seen:?}");
    }
}
