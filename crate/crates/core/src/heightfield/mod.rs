//! Triangulated height-field terrain.
//!
//! Elevation data is a row-major vertex grid; every cell is split into two
//! triangles along the lower-left to upper-right diagonal, so height queries
//! are exact barycentric interpolation and surface normals are well defined
//! everywhere. Columns run along world x (the walking direction), rows along
//! world y.

mod distort;
mod generate;
mod io;

pub use distort::{distort_terrain, DistortionSpec};
pub use generate::{generate_terrain, GenerateParams};

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

/// Count of height queries that had to be clamped back into the footprint.
static CLAMPED_QUERIES: AtomicUsize = AtomicUsize::new(0);

/// Number of out-of-footprint queries served by the clamping accessors since
/// process start. Useful as a soft warning that a trajectory wandered off the
/// modeled terrain.
pub fn clamped_query_count() -> usize {
    CLAMPED_QUERIES.load(Ordering::Relaxed)
}

#[derive(Debug, Error, PartialEq)]
pub enum HeightFieldError {
    #[error("grid must be at least 2x2 vertices, got {rows}x{cols}")]
    GridTooSmall { rows: usize, cols: usize },
    #[error("expected {expected} heights for a {rows}x{cols} grid, got {got}")]
    HeightCountMismatch { rows: usize, cols: usize, expected: usize, got: usize },
    #[error("height at vertex ({row}, {col}) is {value}; heights must be finite and >= 0")]
    InvalidHeight { row: usize, col: usize, value: f64 },
    #[error("cell size {0} must be positive and finite")]
    InvalidCellSize(f64),
    #[error("query ({x:.3}, {y:.3}) outside footprint x [{x_min:.3}, {x_max:.3}], y [{y_min:.3}, {y_max:.3}]")]
    OutOfFootprint { x: f64, y: f64, x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
}

/// Elevation, planar gradient and unit surface normal at a query point.
#[derive(Debug, Clone, Copy)]
pub struct TerrainSample {
    pub height: f64,
    /// (dh/dx, dh/dy); constant on each triangle.
    pub gradient: Vector2<f64>,
    /// Unit normal with positive z component.
    pub normal: Vector3<f64>,
}

/// Regular elevation grid with fixed triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    origin: Vector2<f64>,
    cell_size: f64,
    rows: usize,
    cols: usize,
    heights: Vec<f64>,
}

impl HeightField {
    pub fn new(
        origin: Vector2<f64>,
        cell_size: f64,
        rows: usize,
        cols: usize,
        heights: Vec<f64>,
    ) -> Result<Self, HeightFieldError> {
        if rows < 2 || cols < 2 {
            return Err(HeightFieldError::GridTooSmall { rows, cols });
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(HeightFieldError::InvalidCellSize(cell_size));
        }
        if heights.len() != rows * cols {
            return Err(HeightFieldError::HeightCountMismatch {
                rows,
                cols,
                expected: rows * cols,
                got: heights.len(),
            });
        }
        for (i, &h) in heights.iter().enumerate() {
            if !h.is_finite() || h < 0.0 {
                return Err(HeightFieldError::InvalidHeight {
                    row: i / cols,
                    col: i % cols,
                    value: h,
                });
            }
        }
        Ok(HeightField { origin, cell_size, rows, cols, heights })
    }

    pub fn flat(origin: Vector2<f64>, cell_size: f64, rows: usize, cols: usize, height: f64) -> Result<Self, HeightFieldError> {
        HeightField::new(origin, cell_size, rows, cols, vec![height; rows * cols])
    }

    /// Same heights, relocated in the plane.
    pub fn with_origin(mut self, origin: Vector2<f64>) -> Self {
        self.origin = origin;
        self
    }

    pub fn origin(&self) -> Vector2<f64> {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn height(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.cols + col]
    }

    pub fn set_height(&mut self, row: usize, col: usize, h: f64) {
        self.heights[row * self.cols + col] = h;
    }

    /// World position of a grid vertex.
    pub fn vertex_position(&self, row: usize, col: usize) -> Vector2<f64> {
        self.origin + Vector2::new(col as f64, row as f64) * self.cell_size
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_height(&self) -> f64 {
        self.heights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Inclusive planar footprint (min corner, max corner).
    pub fn footprint(&self) -> (Vector2<f64>, Vector2<f64>) {
        let max = self.origin
            + Vector2::new((self.cols - 1) as f64, (self.rows - 1) as f64) * self.cell_size;
        (self.origin, max)
    }

    pub fn contains(&self, p: Vector2<f64>) -> bool {
        let (lo, hi) = self.footprint();
        p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
    }

    /// Locate the containing cell and local coordinates for an in-footprint
    /// query. Local coordinates are snapped to exact 0/1 near cell edges so
    /// that vertex queries reproduce stored heights bit-for-bit.
    fn locate(&self, p: Vector2<f64>) -> Result<(usize, usize, f64, f64), HeightFieldError> {
        let (lo, hi) = self.footprint();
        let slack = 1e-9 * self.cell_size;
        if p.x < lo.x - slack || p.x > hi.x + slack || p.y < lo.y - slack || p.y > hi.y + slack {
            return Err(HeightFieldError::OutOfFootprint {
                x: p.x,
                y: p.y,
                x_min: lo.x,
                x_max: hi.x,
                y_min: lo.y,
                y_max: hi.y,
            });
        }
        let fx = ((p.x - lo.x) / self.cell_size).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((p.y - lo.y) / self.cell_size).clamp(0.0, (self.rows - 1) as f64);
        let col = (fx.floor() as usize).min(self.cols - 2);
        let row = (fy.floor() as usize).min(self.rows - 2);
        let snap = |t: f64| {
            if t < 1e-9 {
                0.0
            } else if t > 1.0 - 1e-9 {
                1.0
            } else {
                t
            }
        };
        let u = snap(fx - col as f64);
        let v = snap(fy - row as f64);
        Ok((row, col, u, v))
    }

    /// Elevation at `p`; errors outside the footprint.
    pub fn height_at(&self, p: Vector2<f64>) -> Result<f64, HeightFieldError> {
        let (row, col, u, v) = self.locate(p)?;
        let ll = self.height(row, col);
        let lr = self.height(row, col + 1);
        let ul = self.height(row + 1, col);
        let ur = self.height(row + 1, col + 1);
        // Cells split along the lower-left to upper-right diagonal; barycentric
        // weights written so vertex queries hit stored values exactly.
        Ok(if u >= v {
            (1.0 - u) * ll + (u - v) * lr + v * ur
        } else {
            (1.0 - v) * ll + u * ur + (v - u) * ul
        })
    }

    /// Elevation, planar gradient and surface normal at `p`.
    pub fn sample_at(&self, p: Vector2<f64>) -> Result<TerrainSample, HeightFieldError> {
        let (row, col, u, v) = self.locate(p)?;
        let ll = self.height(row, col);
        let lr = self.height(row, col + 1);
        let ul = self.height(row + 1, col);
        let ur = self.height(row + 1, col + 1);
        let (height, gx, gy) = if u >= v {
            (
                (1.0 - u) * ll + (u - v) * lr + v * ur,
                (lr - ll) / self.cell_size,
                (ur - lr) / self.cell_size,
            )
        } else {
            (
                (1.0 - v) * ll + u * ur + (v - u) * ul,
                (ur - ul) / self.cell_size,
                (ul - ll) / self.cell_size,
            )
        };
        let normal = Vector3::new(-gx, -gy, 1.0).normalize();
        Ok(TerrainSample { height, gradient: Vector2::new(gx, gy), normal })
    }

    pub fn normal_at(&self, p: Vector2<f64>) -> Result<Vector3<f64>, HeightFieldError> {
        Ok(self.sample_at(p)?.normal)
    }

    fn clamp_to_footprint(&self, p: Vector2<f64>) -> Vector2<f64> {
        let (lo, hi) = self.footprint();
        let q = Vector2::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y));
        if (q - p).norm() > 1e-9 * self.cell_size {
            CLAMPED_QUERIES.fetch_add(1, Ordering::Relaxed);
        }
        q
    }

    /// Elevation with out-of-footprint queries clamped to the nearest edge
    /// point (counted, see [`clamped_query_count`]).
    pub fn height_at_clamped(&self, p: Vector2<f64>) -> f64 {
        self.height_at(self.clamp_to_footprint(p))
            .expect("clamped query is inside the footprint")
    }

    /// [`HeightField::sample_at`] with edge clamping.
    pub fn sample_at_clamped(&self, p: Vector2<f64>) -> TerrainSample {
        self.sample_at(self.clamp_to_footprint(p))
            .expect("clamped query is inside the footprint")
    }

    /// Embed this field in a larger grid padded with `fill` heights.
    ///
    /// `pad_lo` and `pad_hi` are (rows, cols) of extra vertices below/left and
    /// above/right; the origin shifts so existing vertices keep their world
    /// positions.
    pub fn embed(&self, pad_lo: (usize, usize), pad_hi: (usize, usize), fill: f64) -> HeightField {
        let rows = self.rows + pad_lo.0 + pad_hi.0;
        let cols = self.cols + pad_lo.1 + pad_hi.1;
        let mut heights = vec![fill; rows * cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                heights[(r + pad_lo.0) * cols + (c + pad_lo.1)] = self.height(r, c);
            }
        }
        let origin = self.origin - Vector2::new(pad_lo.1 as f64, pad_lo.0 as f64) * self.cell_size;
        HeightField { origin, cell_size: self.cell_size, rows, cols, heights }
    }

    /// Embed centered in a `target_rows` x `target_cols` grid of zeros.
    /// Requires the padding to split evenly on both axes.
    pub fn embed_centered(&self, target_rows: usize, target_cols: usize) -> HeightField {
        assert!(target_rows >= self.rows && target_cols >= self.cols);
        assert!((target_rows - self.rows) % 2 == 0 && (target_cols - self.cols) % 2 == 0);
        let pad_r = (target_rows - self.rows) / 2;
        let pad_c = (target_cols - self.cols) / 2;
        self.embed((pad_r, pad_c), (pad_r, pad_c), 0.0)
    }

    /// Heights as little-endian f32 bytes, row-major.
    pub fn raw_f32_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.heights.len() * 4);
        for &h in &self.heights {
            out.extend_from_slice(&(h as f32).to_le_bytes());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ramp_field() -> HeightField {
        // h = 0.1 * col: a ramp ascending in +x.
        let rows = 3;
        let cols = 4;
        let heights: Vec<f64> = (0..rows * cols).map(|i| 0.1 * (i % cols) as f64).collect();
        HeightField::new(Vector2::zeros(), 0.5, rows, cols, heights).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(
            HeightField::new(Vector2::zeros(), 0.5, 1, 4, vec![0.0; 4]),
            Err(HeightFieldError::GridTooSmall { .. })
        ));
        assert!(matches!(
            HeightField::new(Vector2::zeros(), 0.5, 2, 2, vec![0.0; 3]),
            Err(HeightFieldError::HeightCountMismatch { .. })
        ));
        assert!(matches!(
            HeightField::new(Vector2::zeros(), 0.5, 2, 2, vec![0.0, 0.0, -0.1, 0.0]),
            Err(HeightFieldError::InvalidHeight { row: 1, col: 0, .. })
        ));
        assert!(matches!(
            HeightField::new(Vector2::zeros(), 0.0, 2, 2, vec![0.0; 4]),
            Err(HeightFieldError::InvalidCellSize(_))
        ));
    }

    #[test]
    fn flat_field_has_constant_height_and_vertical_normal() {
        let f = HeightField::flat(Vector2::new(-1.0, -1.0), 0.25, 9, 9, 0.12).unwrap();
        for &p in &[
            Vector2::new(-1.0, -1.0),
            Vector2::new(0.0, 0.0),
            Vector2::new(0.37, -0.81),
            Vector2::new(1.0, 1.0),
        ] {
            let s = f.sample_at(p).unwrap();
            assert_eq!(s.height, 0.12);
            assert_eq!(s.normal, Vector3::new(0.0, 0.0, 1.0));
        }
    }

    #[test]
    fn vertex_queries_return_stored_heights_exactly() {
        let f = ramp_field();
        for r in 0..f.rows() {
            for c in 0..f.cols() {
                let p = f.vertex_position(r, c);
                assert_eq!(f.height_at(p).unwrap(), f.height(r, c));
            }
        }
    }

    #[test]
    fn cell_centroid_matches_hand_computed_barycentric_value() {
        let f = ramp_field();
        // Centroid of the lower triangle of cell (0,0): vertices LL=(0,0),
        // LR=(0.5,0), UR=(0.5,0.5) with heights 0.0, 0.1, 0.1.
        let centroid = Vector2::new((0.0 + 0.5 + 0.5) / 3.0, (0.0 + 0.0 + 0.5) / 3.0);
        let expect = (0.0 + 0.1 + 0.1) / 3.0;
        assert_relative_eq!(f.height_at(centroid).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn ramp_gradient_and_normal() {
        let f = ramp_field();
        // Slope 0.1 per 0.5 m in x, flat in y.
        let s = f.sample_at(Vector2::new(0.8, 0.6)).unwrap();
        assert_relative_eq!(s.gradient.x, 0.2, epsilon = 1e-12);
        assert_relative_eq!(s.gradient.y, 0.0, epsilon = 1e-12);
        let expect = Vector3::new(-0.2, 0.0, 1.0).normalize();
        assert_relative_eq!(s.normal, expect, epsilon = 1e-12);
        assert!(s.normal.z > 0.0);
    }

    #[test]
    fn out_of_footprint_is_error_and_clamped_query_counts() {
        let f = ramp_field();
        let outside = Vector2::new(5.0, 0.1);
        assert!(matches!(f.height_at(outside), Err(HeightFieldError::OutOfFootprint { .. })));
        let before = clamped_query_count();
        let h = f.height_at_clamped(outside);
        assert_eq!(h, f.height_at(Vector2::new(1.5, 0.1)).unwrap());
        assert!(clamped_query_count() > before);
    }

    #[test]
    fn embed_preserves_interior_and_pads_with_fill() {
        let f = ramp_field();
        let e = f.embed((2, 1), (0, 3), 0.0);
        assert_eq!(e.rows(), 5);
        assert_eq!(e.cols(), 8);
        // Existing vertices keep world position and height.
        for r in 0..f.rows() {
            for c in 0..f.cols() {
                let p = f.vertex_position(r, c);
                assert_eq!(e.height_at(p).unwrap(), f.height(r, c));
            }
        }
        assert_eq!(e.height(0, 0), 0.0);
        let g = f.embed_centered(7, 8);
        assert_eq!((g.rows(), g.cols()), (7, 8));
        assert_eq!(g.height(2, 2), f.height(0, 0));
    }

    proptest! {
        #[test]
        fn interpolation_stays_within_cell_height_bounds(
            px in 0.0f64..1.5,
            py in 0.0f64..1.0,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows = 3;
            let cols = 4;
            let heights: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.0..0.5)).collect();
            let f = HeightField::new(Vector2::zeros(), 0.5, rows, cols, heights.clone()).unwrap();
            let h = f.height_at(Vector2::new(px, py)).unwrap();
            let min = heights.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(h >= min - 1e-12 && h <= max + 1e-12);
        }

        #[test]
        fn interpolation_is_continuous_across_cell_edges(
            edge_col in 1usize..3,
            py in 0.0f64..1.0,
        ) {
            let f = ramp_field();
            let x = edge_col as f64 * 0.5;
            let left = f.height_at(Vector2::new(x - 1e-10, py)).unwrap();
            let mid = f.height_at(Vector2::new(x, py)).unwrap();
            let right = f.height_at(Vector2::new(x + 1e-10, py)).unwrap();
            prop_assert!((left - mid).abs() < 1e-8);
            prop_assert!((mid - right).abs() < 1e-8);
        }
    }
}
