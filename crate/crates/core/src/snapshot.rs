//! Frozen encoder: kernel map, mean and `T` projection matrices.

use rayon::prelude::*;

use crate::code::HashCode;
use crate::error::{check_dim, Error, Result};
use crate::kernel::KernelMapper;
use crate::model::HashModel;
use crate::trainer::FeaturePipeline;

/// Immutable state needed to encode raw vectors. Safe to share across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSnapshot {
    input_dim: usize,
    kernel: Option<KernelMapper>,
    mean: Vec<f64>,
    models: Vec<HashModel>,
}

impl ModelSnapshot {
    pub fn new(
        input_dim: usize,
        kernel: Option<KernelMapper>,
        mean: Vec<f64>,
        models: Vec<HashModel>,
    ) -> Result<Self> {
        let feature_dim = match &kernel {
            Some(k) => {
                check_dim(input_dim, k.input_dim())?;
                k.output_dim()
            }
            None => input_dim,
        };
        check_dim(feature_dim, mean.len())?;
        let first = models
            .first()
            .ok_or_else(|| Error::invalid("snapshot needs at least one model"))?;
        for m in &models {
            check_dim(feature_dim, m.dim())?;
            check_dim(first.bits(), m.bits())?;
        }
        Ok(ModelSnapshot { input_dim, kernel, mean, models })
    }

    pub(crate) fn from_parts(pipeline: &FeaturePipeline, models: Vec<HashModel>) -> Result<Self> {
        if !pipeline.is_ready() {
            return Err(Error::contract("snapshot requested before warmup finished"));
        }
        Self::new(
            pipeline.input_dim(),
            pipeline.kernel().cloned(),
            pipeline.mean().to_vec(),
            models,
        )
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn bits(&self) -> usize {
        self.models[0].bits()
    }

    pub fn model_count(&self) -> usize {
        self.models.len()
    }

    pub fn models(&self) -> &[HashModel] {
        &self.models
    }

    pub fn kernel(&self) -> Option<&KernelMapper> {
        self.kernel.as_ref()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Kernel-map (if enabled) and center a raw vector.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len())?;
        let mut z = match &self.kernel {
            Some(k) => k.map_one(x)?,
            None => x.to_vec(),
        };
        for (v, m) in z.iter_mut().zip(&self.mean) {
            *v -= m;
        }
        Ok(z)
    }

    /// One code per model.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<HashCode>> {
        let z = self.features(x)?;
        self.models.iter().map(|m| m.encode(&z)).collect()
    }

    /// Encode `n` row-major vectors in parallel. Result is item-major: `out[item][model]`.
    pub fn encode_rows(&self, rows: &[f64]) -> Result<Vec<Vec<HashCode>>> {
        if !rows.len().is_multiple_of(self.input_dim) {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: rows.len() % self.input_dim,
            });
        }
        rows.par_chunks(self.input_dim).map(|x| self.encode(x)).collect()
    }
}
