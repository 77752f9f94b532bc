//! Explicit Gaussian RBF feature map over a fixed set of anchor points.

use crate::error::{check_dim, Error, Result};

pub const DEFAULT_SIGMA: f64 = 1.0;

/// `z(x)[p] = exp(-‖x - a_p‖² / 2σ²)` for anchors `a_1 .. a_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMapper {
    input_dim: usize,
    sigma: f64,
    // m × input_dim, row-major
    anchors: Vec<f64>,
}

impl KernelMapper {
    /// Use `samples` verbatim, in order, as anchors.
    pub fn fit_anchors(samples: &[Vec<f64>], sigma: f64) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("kernel map needs at least one anchor"))?;
        let dim = first.len();
        let mut anchors = Vec::with_capacity(samples.len() * dim);
        for s in samples {
            check_dim(dim, s.len())?;
            anchors.extend_from_slice(s);
        }
        Self::from_flat(dim, sigma, anchors)
    }

    /// Anchors given as a flat row-major buffer of `m * input_dim` values.
    pub fn from_flat(input_dim: usize, sigma: f64, anchors: Vec<f64>) -> Result<Self> {
        if input_dim == 0 || anchors.is_empty() || !anchors.len().is_multiple_of(input_dim) {
            return Err(Error::invalid(format!(
                "anchor buffer of {} values does not hold rows of length {input_dim}",
                anchors.len()
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("kernel bandwidth must be positive, got {sigma}")));
        }
        if anchors.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("anchors have non-finite entries"));
        }
        Ok(KernelMapper { input_dim, sigma, anchors })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of anchors, which is the mapped dimension.
    pub fn output_dim(&self) -> usize {
        self.anchors.len() / self.input_dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn anchors_flat(&self) -> &[f64] {
        &self.anchors
    }

    pub fn anchor(&self, p: usize) -> &[f64] {
        &self.anchors[p * self.input_dim..(p + 1) * self.input_dim]
    }

    pub fn map_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len())?;
        let scale = -1.0 / (2.0 * self.sigma * self.sigma);
        Ok(self
            .anchors
            .chunks_exact(self.input_dim)
            .map(|a| {
                let d2: f64 = a.iter().zip(x).map(|(u, v)| (u - v) * (u - v)).sum();
                (d2 * scale).exp()
            })
            .collect())
    }

    pub fn heap_bytes(&self) -> usize {
        self.anchors.capacity() * std::mem::size_of::<f64>()
    }
}
