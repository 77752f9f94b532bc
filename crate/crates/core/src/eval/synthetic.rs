//! Synthetic labeled data for smoke tests and benchmarks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::RngSeed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub points: usize,
    pub dim: usize,
    /// Standard deviation of the class centers around the origin.
    pub spread: f64,
    /// Standard deviation of points around their center.
    pub noise: f64,
}

/// Isotropic Gaussian clusters; labels are assigned round-robin so class sizes
/// differ by at most one.
pub fn gaussian_blobs(spec: &BlobSpec, seed: RngSeed) -> Result<Dataset> {
    if spec.classes == 0 || spec.dim == 0 {
        return Err(Error::invalid("blobs need at least one class and one dimension"));
    }
    if !(spec.spread >= 0.0 && spec.noise >= 0.0) {
        return Err(Error::invalid("blob spread and noise must be non-negative"));
    }
    let mut rng = seed.rng();
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let centers: Vec<f64> = (0..spec.classes * spec.dim).map(|_| spec.spread * normal()).collect();
    let mut values = Vec::with_capacity(spec.points * spec.dim);
    let mut labels = Vec::with_capacity(spec.points);
    for p in 0..spec.points {
        let c = p % spec.classes;
        for k in 0..spec.dim {
            values.push(centers[c * spec.dim + k] + spec.noise * normal());
        }
        labels.push(c as u32);
    }
    Dataset::new(spec.dim, values, Some(labels))
}

/// Uniform random permutation of `0..n`.
pub fn permutation(n: usize, seed: RngSeed) -> Vec<usize> {
    let mut rng = seed.rng();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_deterministic_and_balanced() {
        let spec = BlobSpec { classes: 3, points: 10, dim: 4, spread: 5.0, noise: 0.1 };
        let a = gaussian_blobs(&spec, RngSeed(1)).unwrap();
        assert_eq!(a, gaussian_blobs(&spec, RngSeed(1)).unwrap());
        assert_ne!(a, gaussian_blobs(&spec, RngSeed(2)).unwrap());
        assert_eq!(a.len(), 10);
        let labels = a.labels().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 4);
        assert_eq!(labels.iter().filter(|&&l| l == 2).count(), 3);
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut p = permutation(100, RngSeed(5));
        assert_ne!(p, (0..100).collect::<Vec<_>>());
        p.sort();
        assert_eq!(p, (0..100).collect::<Vec<_>>());
    }
}
