//! Procedural terrain generation.
//!
//! A coarse matrix of uniform random coefficients is tiled up by a Kronecker
//! product with a 2x2 block of ones, cyclically shifted along the columns,
//! attenuated by the max of a few radial basis functions, and rescaled to a
//! fixed peak height.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HeightField;

/// Parameters of the terrain generator. Defaults reproduce the data-set
/// terrains: 16x16 vertices over 2 m x 2 m, coefficients from `[0, 0.2]`,
/// three RBF envelopes, 0.30 m peak height.
#[derive(Debug, Clone)]
pub struct GenerateParams {
    /// Output grid (rows, cols); both must be even (tile doubling).
    pub grid: (usize, usize),
    /// Covered area (x extent, y extent) in meters; must give square cells.
    pub footprint: (f64, f64),
    /// Uniform range of the coarse coefficients (m).
    pub coeff_range: (f64, f64),
    /// Number of radial basis envelopes combined by pointwise max.
    pub n_envelopes: usize,
    /// Peak height after rescaling (m).
    pub max_height: f64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        GenerateParams {
            grid: (16, 16),
            footprint: (2.0, 2.0),
            coeff_range: (0.0, 0.2),
            n_envelopes: 3,
            max_height: 0.30,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

/// Generate a procedural terrain patch at origin (0, 0). Total function of
/// the seed: equal seeds give bit-identical fields.
pub fn generate_terrain(seed: u64, params: &GenerateParams) -> HeightField {
    let (rows, cols) = params.grid;
    assert!(rows >= 2 && cols >= 2 && rows % 2 == 0 && cols % 2 == 0, "grid dims must be even");
    let (fx, fy) = params.footprint;
    assert!(fx > 0.0 && fy > 0.0, "footprint must be positive");
    let cell = fx / (cols - 1) as f64;
    let cell_y = fy / (rows - 1) as f64;
    assert!(
        (cell - cell_y).abs() < 1e-9 * cell.max(cell_y),
        "footprint and grid must give square cells"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Coarse coefficients, tiled 2x2 by the Kronecker product with ones.
    let (half_r, half_c) = (rows / 2, cols / 2);
    let coeffs: Vec<f64> = (0..half_r * half_c)
        .map(|_| uniform(&mut rng, params.coeff_range.0, params.coeff_range.1))
        .collect();
    let tiled = |r: usize, c: usize| coeffs[(r / 2) * half_c + (c / 2)];

    // Cyclic column shift so tile seams move around.
    let shift = rng.random_range(0..cols);
    let mut heights = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            heights[r * cols + c] = tiled(r, (c + shift) % cols);
        }
    }

    // Radial basis envelopes f_i(p) = exp(-|c_i - p| / h_i), h_i = exp(-2 eta_i),
    // combined by pointwise max and multiplied into the field.
    let envelopes: Vec<(Vector2<f64>, f64)> = (0..params.n_envelopes)
        .map(|_| {
            let center = Vector2::new(uniform(&mut rng, 0.0, fx), uniform(&mut rng, 0.0, fy));
            let eta: f64 = rng.random();
            (center, (-2.0 * eta).exp())
        })
        .collect();
    for r in 0..rows {
        for c in 0..cols {
            let p = Vector2::new(c as f64 * cell, r as f64 * cell);
            let env = envelopes
                .iter()
                .map(|(center, h)| (-(center - p).norm() / h).exp())
                .fold(0.0f64, f64::max);
            heights[r * cols + c] *= env;
        }
    }

    // Rescale the peak to max_height; written as (h/m)*max so the argmax
    // vertex lands on max_height exactly.
    let m = heights.iter().cloned().fold(0.0f64, f64::max);
    if m > 0.0 {
        for h in &mut heights {
            *h = (*h / m) * params.max_height;
        }
    }

    HeightField::new(Vector2::zeros(), cell, rows, cols, heights)
        .expect("generated heights are finite and non-negative")
}
