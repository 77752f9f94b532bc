//! Linear hash model: `h = sgn(Wᵀx)` with `W` stored column-major (d×r).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::code::HashCode;
use crate::error::{check_dim, Error, Result};

/// Seed for every random draw in the crate. Equal seeds give equal draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Seed for the `index`-th member of a family. Index 0 is the seed itself.
    pub fn derive(self, index: u64) -> RngSeed {
        RngSeed(self.0 ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Projection matrix `W` with columns `w_1 .. w_r`, each of length `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct HashModel {
    dim: usize,
    bits: usize,
    weights: Vec<f64>,
}

impl HashModel {
    /// Wrap a column-major `dim × bits` matrix. Entries must be finite.
    pub fn from_columns(dim: usize, bits: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || bits == 0 {
            return Err(Error::invalid("model dimension and code length must be positive"));
        }
        check_dim(dim * bits, weights.len())?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("projection matrix has non-finite entries"));
        }
        Ok(HashModel { dim, bits, weights })
    }

    /// Random-projection initialization: i.i.d. standard normal entries.
    pub fn init_lsh(dim: usize, bits: usize, seed: RngSeed) -> Result<Self> {
        if dim == 0 || bits == 0 {
            return Err(Error::invalid(format!(
                "init_lsh needs d >= 1 and r >= 1, got d={dim}, r={bits}"
            )));
        }
        let mut rng = seed.rng();
        let weights = (0..dim * bits)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(HashModel { dim, bits, weights })
    }

    /// Input dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Code length `r`.
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn column(&self, k: usize) -> &[f64] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn column_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.weights[k * self.dim..(k + 1) * self.dim]
    }

    /// Indices of all-zero columns.
    pub fn zero_columns(&self) -> Vec<usize> {
        (0..self.bits)
            .filter(|&k| self.column(k).iter().all(|&w| w == 0.0))
            .collect()
    }

    /// `Wᵀx`, one entry per bit.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .map(|w| dot(w, x))
            .collect()
    }

    /// Bit k is +1 iff `w_kᵀx >= 0`.
    pub fn encode(&self, x: &[f64]) -> Result<HashCode> {
        Ok(HashCode::from_signs_of(&self.project(x)?))
    }

    /// `fᵀWᵀx`. Maximized over `f` by `encode(x)`.
    pub fn structured_score(&self, x: &[f64], f: &HashCode) -> Result<f64> {
        check_dim(self.bits, f.len())?;
        let proj = self.project(x)?;
        Ok(signed_sum(&proj, f))
    }

    /// Squared Frobenius distance to another model of the same shape.
    pub fn distance_sq(&self, other: &HashModel) -> Result<f64> {
        check_dim(self.dim, other.dim)?;
        check_dim(self.bits, other.bits)?;
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// Bytes held by the weight buffer.
    pub fn heap_bytes(&self) -> usize {
        self.weights.capacity() * std::mem::size_of::<f64>()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_k f[k] · values[k]` with `f` read as ±1.
pub(crate) fn signed_sum(values: &[f64], f: &HashCode) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(k, v)| f.sign(k) * v)
        .sum()
}
