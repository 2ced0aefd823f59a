//! Seeded piecewise-constant test images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::potts::Image;

/// Background plus `n_shapes` rectangles or disks, each at its own gray level.
pub fn gen_piecewise_constant(n1: usize, n2: usize, seed: u64, n_shapes: usize) -> Result<Image> {
    Ok(generate(n1, n2, seed, n_shapes, 0.0)?.0)
}

/// [`gen_piecewise_constant`] plus clamped Gaussian noise of deviation `noise_sigma`.
pub fn gen_synthetic(n1: usize, n2: usize, seed: u64, n_shapes: usize, noise_sigma: f64) -> Result<Image> {
    Ok(generate(n1, n2, seed, n_shapes, noise_sigma)?.1)
}

fn generate(n1: usize, n2: usize, seed: u64, n_shapes: usize, noise_sigma: f64) -> Result<(Image, Image)> {
    if n1 < 8 || n2 < 8 {
        return Err(Error::config(format!("synthetic images need at least 8x8 pixels, got {n1}x{n2}")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::config(format!("noise deviation must be non-negative, got {noise_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = rng.random_range(0.0..1.0);
    let mut values = vec![background; n1 * n2];
    for _ in 0..n_shapes {
        let level = rng.random_range(0.0..1.0);
        let ci = rng.random_range(0.0..n1 as f64);
        let cj = rng.random_range(0.0..n2 as f64);
        let ri = rng.random_range(0.1..0.3) * n1 as f64;
        let rj = rng.random_range(0.1..0.3) * n2 as f64;
        let disk = rng.random_bool(0.5);
        for i in 0..n1 {
            for j in 0..n2 {
                let (di, dj) = ((i as f64 - ci) / ri, (j as f64 - cj) / rj);
                let inside = if disk { di * di + dj * dj <= 1.0 } else { di.abs() <= 1.0 && dj.abs() <= 1.0 };
                if inside {
                    values[i * n2 + j] = level;
                }
            }
        }
    }
    let clean = Image { n1, n2, values };
    let mut noisy = clean.clone();
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::config(e.to_string()))?;
        for v in &mut noisy.values {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    Ok((clean, noisy))
}
