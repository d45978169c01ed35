//! Seeded synthetic datasets for tests and benchmarks.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Isotropic Gaussian clusters, `per_class` points around each center with the
/// given standard deviation. Labels are the supplied ones, in center order.
pub fn gaussian_blobs<T: Scalar>(
    centers: &[Vec<f64>],
    labels: &[i64],
    per_class: usize,
    std: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if centers.is_empty() || centers.len() != labels.len() {
        return Err(Error::invalid("one label per center is required"));
    }
    let d = centers[0].len();
    if centers.iter().any(|c| c.len() != d) {
        return Err(Error::invalid("centers must share a dimension"));
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = per_class * centers.len();
    let mut x = DMatrix::<T>::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for (k, (center, &label)) in centers.iter().zip(labels).enumerate() {
        for i in 0..per_class {
            let row = k * per_class + i;
            for j in 0..d {
                x[(row, j)] = T::lit(center[j] + normal.sample(&mut rng));
            }
            y.push(label);
        }
    }
    Dataset::new(x, y)
}

/// Two 2-D classes `+1` / `-1` whose centers are `separation` standard deviations apart.
pub fn two_blobs<T: Scalar>(n: usize, separation: f64, seed: u64) -> Result<Dataset<T>> {
    let half = separation / 2.0;
    gaussian_blobs(&[vec![half, 0.0], vec![-half, 0.0]], &[1, -1], n / 2, 1.0, seed)
}

/// Flips the sign of a random `fraction` of the `+1 / -1` labels.
pub fn flip_labels<T: Scalar>(ds: &Dataset<T>, fraction: f64, seed: u64) -> Result<Dataset<T>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("flip fraction must lie in [0, 1]"));
    }
    let mut out = ds.clone();
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let k = (fraction * ds.len() as f64).round() as usize;
    for &i in &idx[..k] {
        out.labels[i] = -out.labels[i];
    }
    Ok(out)
}
