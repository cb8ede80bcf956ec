//! Contact-preserving terrain distortion.
//!
//! Embeds a terrain patch in a larger flat grid, rescales the heights inside
//! a handful of random axis-aligned rectangles, then restores every triangle
//! that overlaps a small square around a planned contact so the planned
//! footholds stay valid on the distorted terrain.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HeightField, HeightFieldError};

/// Parameters of the distortion pass.
#[derive(Debug, Clone)]
pub struct DistortionSpec {
    /// Embedding grid size in vertices.
    pub embed_rows: usize,
    pub embed_cols: usize,
    /// Number of random rectangles to rescale.
    pub n_rectangles: usize,
    /// Scale range for rectangles touching the original patch or the flat
    /// band ahead of it in the walking direction.
    pub inner_scale_range: (f64, f64),
    /// Scale range for rectangles elsewhere.
    pub outer_scale_range: (f64, f64),
    /// Side length of the square kept intact around each contact (m).
    pub contact_patch_side: f64,
    pub rng_seed: u64,
}

impl Default for DistortionSpec {
    fn default() -> Self {
        DistortionSpec {
            embed_rows: 46,
            embed_cols: 46,
            n_rectangles: 8,
            inner_scale_range: (0.7, 1.0),
            outer_scale_range: (0.8, 1.5),
            contact_patch_side: 0.10,
            rng_seed: 0,
        }
    }
}

/// Whether a vertex-index rectangle gets the conservative "inner" scaling.
///
/// Inner means it overlaps the central original patch on both axes, or it
/// reaches the flat band ahead of the patch in the walking direction (+x,
/// higher column indices); everything else is outer.
fn rectangle_is_inner(
    (r0, r1): (usize, usize),
    (c0, c1): (usize, usize),
    pad: (usize, usize),
    patch: (usize, usize),
) -> bool {
    let (pad_r, pad_c) = pad;
    let (patch_rows, patch_cols) = patch;
    let rows_overlap = r1 >= pad_r && r0 <= pad_r + patch_rows - 1;
    let cols_overlap = c1 >= pad_c && c0 <= pad_c + patch_cols - 1;
    let reaches_front = c1 >= pad_c + patch_cols;
    (rows_overlap && cols_overlap) || reaches_front
}

/// 2-D separating-axis overlap test between a triangle and an axis-aligned
/// box; touching counts as overlapping.
fn triangle_overlaps_box(tri: &[Vector2<f64>; 3], lo: Vector2<f64>, hi: Vector2<f64>) -> bool {
    let (tx0, tx1) = tri.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.x), b.max(p.x))
    });
    let (ty0, ty1) = tri.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.y), b.max(p.y))
    });
    if tx1 < lo.x || tx0 > hi.x || ty1 < lo.y || ty0 > hi.y {
        return false;
    }
    let corners = [
        lo,
        Vector2::new(hi.x, lo.y),
        hi,
        Vector2::new(lo.x, hi.y),
    ];
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let axis = Vector2::new(-(b.y - a.y), b.x - a.x);
        let (t0, t1) = tri.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo_p, hi_p), p| {
            let d = axis.dot(p);
            (lo_p.min(d), hi_p.max(d))
        });
        let (b0, b1) = corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo_p, hi_p), p| {
            let d = axis.dot(p);
            (lo_p.min(d), hi_p.max(d))
        });
        if t1 < b0 || t0 > b1 {
            return false;
        }
    }
    true
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

/// Distort a terrain patch while preserving the surface under each contact.
///
/// Scale factors always apply to the pre-distortion heights, so overlapping
/// rectangles overwrite rather than compound and every output height stays
/// within the scaled input bounds.
pub fn distort_terrain(
    field: &HeightField,
    contacts: &[Vector2<f64>],
    spec: &DistortionSpec,
) -> Result<HeightField, HeightFieldError> {
    assert!(
        spec.embed_rows >= field.rows() && spec.embed_cols >= field.cols(),
        "embedding grid smaller than field"
    );
    let original = field.embed_centered(spec.embed_rows, spec.embed_cols);
    for &c in contacts {
        if !original.contains(c) {
            let (lo, hi) = original.footprint();
            return Err(HeightFieldError::OutOfFootprint {
                x: c.x,
                y: c.y,
                x_min: lo.x,
                x_max: hi.x,
                y_min: lo.y,
                y_max: hi.y,
            });
        }
    }
    let pad = (
        (spec.embed_rows - field.rows()) / 2,
        (spec.embed_cols - field.cols()) / 2,
    );
    let patch = (field.rows(), field.cols());

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut out = original.clone();
    for _ in 0..spec.n_rectangles {
        let ra = rng.random_range(0..spec.embed_rows);
        let rb = rng.random_range(0..spec.embed_rows);
        let ca = rng.random_range(0..spec.embed_cols);
        let cb = rng.random_range(0..spec.embed_cols);
        let rr = (ra.min(rb), ra.max(rb));
        let cc = (ca.min(cb), ca.max(cb));
        let range = if rectangle_is_inner(rr, cc, pad, patch) {
            spec.inner_scale_range
        } else {
            spec.outer_scale_range
        };
        let factor = uniform(&mut rng, range);
        if rr.0 == rr.1 || cc.0 == cc.1 {
            continue; // zero-area rectangle: factor drawn, nothing scaled
        }
        for r in rr.0..=rr.1 {
            for c in cc.0..=cc.1 {
                out.set_height(r, c, original.height(r, c) * factor);
            }
        }
    }

    // Restore every triangle overlapping a contact square.
    let half = spec.contact_patch_side / 2.0;
    let cell = original.cell_size();
    let (grid_lo, _) = original.footprint();
    for &contact in contacts {
        let lo = contact - Vector2::new(half, half);
        let hi = contact + Vector2::new(half, half);
        let c0 = (((lo.x - grid_lo.x) / cell).floor() as isize - 1).max(0) as usize;
        let r0 = (((lo.y - grid_lo.y) / cell).floor() as isize - 1).max(0) as usize;
        let c1 = ((((hi.x - grid_lo.x) / cell).ceil() as isize + 1) as usize).min(original.cols() - 2);
        let r1 = ((((hi.y - grid_lo.y) / cell).ceil() as isize + 1) as usize).min(original.rows() - 2);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let ll = original.vertex_position(r, c);
                let lr = original.vertex_position(r, c + 1);
                let ul = original.vertex_position(r + 1, c);
                let ur = original.vertex_position(r + 1, c + 1);
                let lower = [ll, lr, ur];
                let upper = [ll, ur, ul];
                if triangle_overlaps_box(&lower, lo, hi) {
                    out.set_height(r, c, original.height(r, c));
                    out.set_height(r, c + 1, original.height(r, c + 1));
                    out.set_height(r + 1, c + 1, original.height(r + 1, c + 1));
                }
                if triangle_overlaps_box(&upper, lo, hi) {
                    out.set_height(r, c, original.height(r, c));
                    out.set_height(r + 1, c + 1, original.height(r + 1, c + 1));
                    out.set_height(r + 1, c, original.height(r + 1, c));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heightfield::{generate_terrain, GenerateParams};

    fn test_field(seed: u64) -> HeightField {
        generate_terrain(seed, &GenerateParams::default())
    }

    #[test]
    fn unit_scales_and_no_contacts_reproduce_embedded_input() {
        let field = test_field(11);
        let spec = DistortionSpec {
            inner_scale_range: (1.0, 1.0),
            outer_scale_range: (1.0, 1.0),
            ..DistortionSpec::default()
        };
        let out = distort_terrain(&field, &[], &spec).unwrap();
        let embedded = field.embed_centered(46, 46);
        assert_eq!(out.heights(), embedded.heights());
        assert_eq!(out.origin(), embedded.origin());
    }

    #[test]
    fn same_seed_is_deterministic() {
        let field = test_field(4);
        let contacts = [Vector2::new(0.5, 0.5), Vector2::new(1.4, 1.1)];
        let spec = DistortionSpec { rng_seed: 99, ..DistortionSpec::default() };
        let a = distort_terrain(&field, &contacts, &spec).unwrap();
        let b = distort_terrain(&field, &contacts, &spec).unwrap();
        assert_eq!(a.heights(), b.heights());
    }

    #[test]
    fn heights_stay_within_scaled_input_bounds() {
        for seed in 0..20 {
            let field = test_field(seed);
            let embedded = field.embed_centered(46, 46);
            let spec = DistortionSpec { rng_seed: seed ^ 0xabcd, ..DistortionSpec::default() };
            let out = distort_terrain(&field, &[], &spec).unwrap();
            let lo = 0.7 * embedded.min_height();
            let hi = 1.5 * embedded.max_height();
            for &h in out.heights() {
                assert!(h >= lo - 1e-12 && h <= hi + 1e-12, "height {h} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn contact_squares_are_exactly_preserved() {
        for seed in 0..10 {
            let field = test_field(seed);
            let embedded = field.embed_centered(46, 46);
            let contacts = [
                Vector2::new(0.31, 0.42),
                Vector2::new(1.05, 1.63),
                Vector2::new(1.9, 0.2),
            ];
            let spec = DistortionSpec { rng_seed: seed.wrapping_mul(7919), ..DistortionSpec::default() };
            let out = distort_terrain(&field, &contacts, &spec).unwrap();
            for contact in contacts {
                // 5x5 probe grid strictly inside the 0.10 m square.
                for i in 0..5 {
                    for j in 0..5 {
                        let p = contact
                            + Vector2::new(
                                -0.049 + 0.0245 * i as f64,
                                -0.049 + 0.0245 * j as f64,
                            );
                        let before = embedded.height_at(p).unwrap();
                        let after = out.height_at(p).unwrap();
                        assert_eq!(before.to_bits(), after.to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn contact_outside_embedded_footprint_is_error() {
        let field = test_field(0);
        let spec = DistortionSpec::default();
        let err = distort_terrain(&field, &[Vector2::new(50.0, 0.0)], &spec);
        assert!(matches!(err, Err(HeightFieldError::OutOfFootprint { .. })));
    }

    #[test]
    fn rectangle_classification() {
        // 16x16 patch embedded in 46x46: pad 15, patch occupies 15..=30,
        // front band is columns 31..=45.
        let pad = (15, 15);
        let patch = (16, 16);
        // Fully in the low border on both axes: outer.
        assert!(!rectangle_is_inner((0, 10), (0, 10), pad, patch));
        // Overlaps the central patch on both axes: inner.
        assert!(rectangle_is_inner((10, 20), (14, 16), pad, patch));
        // Row range misses the patch but columns reach the front band: inner.
        assert!(rectangle_is_inner((0, 5), (31, 40), pad, patch));
        // Rows overlap the patch band but columns stay in the low border: outer.
        assert!(!rectangle_is_inner((16, 20), (0, 5), pad, patch));
        // Columns beyond the patch but short of the front band edge... the
        // band starts right after the patch, so column 30 is patch, 31 front.
        assert!(!rectangle_is_inner((0, 5), (16, 30), pad, patch));
        assert!(rectangle_is_inner((0, 5), (16, 31), pad, patch));
    }

    #[test]
    fn triangle_box_overlap_cases() {
        let lo = Vector2::new(0.0, 0.0);
        let hi = Vector2::new(1.0, 1.0);
        // Triangle containing the box.
        let big = [
            Vector2::new(-5.0, -5.0),
            Vector2::new(5.0, -5.0),
            Vector2::new(0.0, 5.0),
        ];
        assert!(triangle_overlaps_box(&big, lo, hi));
        // Triangle inside the box.
        let small = [
            Vector2::new(0.4, 0.4),
            Vector2::new(0.6, 0.4),
            Vector2::new(0.5, 0.6),
        ];
        assert!(triangle_overlaps_box(&small, lo, hi));
        // Disjoint along an edge axis despite overlapping bounding boxes.
        let diagonal = [
            Vector2::new(1.2, -0.4),
            Vector2::new(2.0, 0.4),
            Vector2::new(1.6, -1.0),
        ];
        assert!(!triangle_overlaps_box(&diagonal, lo, hi));
        // Separated by the diagonal edge: bounding boxes overlap but the
        // hypotenuse axis (x + y = 2.1 > 2) separates.
        let corner = [
            Vector2::new(1.6, 0.5),
            Vector2::new(0.5, 1.6),
            Vector2::new(1.8, 1.8),
        ];
        assert!(!triangle_overlaps_box(&corner, lo, hi));
        // Touching an edge counts as overlap.
        let touching = [
            Vector2::new(1.0, 0.5),
            Vector2::new(2.0, 0.0),
            Vector2::new(2.0, 1.0),
        ];
        assert!(triangle_overlaps_box(&touching, lo, hi));
    }
}
