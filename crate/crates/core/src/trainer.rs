//! Online passive-aggressive training of a single hash model.
//!
//! [`FeaturePipeline`] owns everything that belongs to the data stream (warmup
//! buffer, optional kernel map, running mean). [`OnlineHasher`] owns one
//! projection matrix and performs the closed-form update on already-centered
//! pairs. [`Trainer`] glues one of each together.

use crate::code::CodePair;
use crate::error::{check_dim, Error, Result};
use crate::inference::{infer_from_projection, FlipPlan, PairProjection, Side};
use crate::kernel::{KernelMapper, DEFAULT_SIGMA};
use crate::loss::{similarity_loss, Label, LossParams, PairSample};
use crate::model::{HashModel, RngSeed};
use crate::snapshot::ModelSnapshot;

/// Margin parameter used by default.
pub const DEFAULT_C: f64 = 0.1;
/// Margin parameter listed in the reference parameter table; selectable with `--C 1`.
pub const TABULATED_C: f64 = 1.0;
pub const DEFAULT_BITS: usize = 48;
pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_WARMUP: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub alpha: u32,
    pub beta: f64,
    pub c: f64,
    pub bits: usize,
    pub seed: RngSeed,
    pub warmup: usize,
    pub kernel: bool,
    pub sigma: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            alpha: 0,
            beta: DEFAULT_BETA,
            c: DEFAULT_C,
            bits: DEFAULT_BITS,
            seed: RngSeed(0),
            warmup: DEFAULT_WARMUP,
            kernel: false,
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl TrainerConfig {
    pub fn loss_params(&self) -> Result<LossParams> {
        LossParams::new(self.alpha, self.beta, self.bits)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss_params()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("C must be positive, got {}", self.c)));
        }
        if self.warmup == 0 {
            return Err(Error::invalid("warmup must be at least 1"));
        }
        if self.kernel && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Dimension the projection matrix operates on.
    pub fn feature_dim(&self, input_dim: usize) -> usize {
        if self.kernel {
            self.warmup
        } else {
            input_dim
        }
    }
}

/// Warmup buffering, optional kernel mapping and running-mean centering.
#[derive(Clone, Debug)]
pub struct FeaturePipeline {
    input_dim: usize,
    warmup: usize,
    sigma: Option<f64>,
    buffer: Vec<Vec<f64>>,
    kernel: Option<KernelMapper>,
    mean: Vec<f64>,
    count: u64,
    ready: bool,
}

impl FeaturePipeline {
    /// `sigma` enables the kernel map, with `warmup` anchors.
    pub fn new(input_dim: usize, warmup: usize, sigma: Option<f64>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if warmup == 0 {
            return Err(Error::invalid("warmup must be at least 1"));
        }
        Ok(FeaturePipeline {
            input_dim,
            warmup,
            sigma,
            buffer: Vec::with_capacity(warmup),
            kernel: None,
            mean: Vec::new(),
            count: 0,
            ready: false,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn feature_dim(&self) -> usize {
        if self.sigma.is_some() {
            self.warmup
        } else {
            self.input_dim
        }
    }

    pub fn is_ready(&self) -> bool {
        self.ready
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Vectors folded into the mean so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn kernel(&self) -> Option<&KernelMapper> {
        self.kernel.as_ref()
    }

    /// Buffer a raw vector. The pipeline becomes ready once `warmup` vectors arrived.
    pub fn ingest_warmup(&mut self, x: &[f64]) -> Result<()> {
        if self.ready {
            return Err(Error::contract("warmup ingestion after training started"));
        }
        check_dim(self.input_dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("warmup vector has non-finite entries"));
        }
        self.buffer.push(x.to_vec());
        if self.buffer.len() == self.warmup {
            self.finish_warmup()?;
        }
        Ok(())
    }

    fn finish_warmup(&mut self) -> Result<()> {
        let buffer = std::mem::take(&mut self.buffer);
        if let Some(sigma) = self.sigma {
            self.kernel = Some(KernelMapper::fit_anchors(&buffer, sigma)?);
        }
        self.mean = vec![0.0; self.feature_dim()];
        self.count = 0;
        for x in &buffer {
            let z = self.map(x)?;
            self.fold(&z);
        }
        self.ready = true;
        Ok(())
    }

    /// Kernel-map `x` if enabled, otherwise copy it.
    pub fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len())?;
        match &self.kernel {
            Some(k) => k.map_one(x),
            None => Ok(x.to_vec()),
        }
    }

    fn fold(&mut self, z: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for (m, v) in self.mean.iter_mut().zip(z) {
            *m += (v - *m) / n;
        }
    }

    fn require_ready(&self) -> Result<()> {
        if !self.ready {
            return Err(Error::contract(format!(
                "pipeline not ready: {} of {} warmup vectors seen",
                self.buffer.len(),
                self.warmup
            )));
        }
        Ok(())
    }

    /// `map(x) - μ`, then fold `map(x)` into μ.
    pub fn center(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_ready()?;
        let z = self.map(x)?;
        let centered = z.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        self.fold(&z);
        Ok(centered)
    }

    /// Center both points against the same mean, then fold both in.
    pub fn center_pair(&mut self, xi: &[f64], xj: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.require_ready()?;
        let zi = self.map(xi)?;
        let zj = self.map(xj)?;
        let ci = zi.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        let cj = zj.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        self.fold(&zi);
        self.fold(&zj);
        Ok((ci, cj))
    }

    /// `map(x) - μ` without touching μ.
    pub fn center_frozen(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_ready()?;
        let mut z = self.map(x)?;
        for (v, m) in z.iter_mut().zip(&self.mean) {
            *v -= m;
        }
        Ok(z)
    }

    pub fn heap_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        self.mean.capacity() * f
            + self.buffer.capacity() * std::mem::size_of::<Vec<f64>>()
            + self.buffer.iter().map(|b| b.capacity() * f).sum::<usize>()
            + self.kernel.as_ref().map_or(0, KernelMapper::heap_bytes)
    }
}

/// Diagnostics of one update round.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateReport {
    /// Similarity loss `R` of the model's codes.
    pub similarity_loss: f64,
    /// Prediction loss `ℓ` before the update; 0 on passive rounds.
    pub prediction_loss: f64,
    pub tau: f64,
    /// `‖𝕩(𝕘-𝕙)ᵀ‖²_F`; 0 on passive rounds.
    pub update_norm_sq: f64,
    /// The model's codes for the pair.
    pub codes: CodePair,
    /// Zero-loss target codes, present whenever `similarity_loss > 0`.
    pub target: Option<CodePair>,
    pub plan: Option<FlipPlan>,
    pub updated: bool,
    pub degenerate: bool,
}

/// The model's view of a centered pair before deciding whether to update.
#[derive(Clone, Debug)]
pub struct Assessment {
    pub projection: PairProjection,
    pub codes: CodePair,
    pub label: Label,
    pub similarity_loss: f64,
}

/// One projection matrix trained by closed-form passive-aggressive steps.
#[derive(Clone, Debug)]
pub struct OnlineHasher {
    model: HashModel,
    params: LossParams,
    c: f64,
    steps: u64,
    updates: u64,
}

impl OnlineHasher {
    pub fn new(model: HashModel, params: LossParams, c: f64) -> Result<Self> {
        check_dim(params.bits(), model.bits())?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("C must be positive, got {c}")));
        }
        Ok(OnlineHasher { model, params, c, steps: 0, updates: 0 })
    }

    pub fn model(&self) -> &HashModel {
        &self.model
    }

    pub fn params(&self) -> &LossParams {
        &self.params
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Rounds processed.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Rounds that changed the model.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Encode both points and compute the similarity loss.
    pub fn assess(&self, pair: &PairSample) -> Result<Assessment> {
        let projection = PairProjection::compute(&self.model, pair)?;
        let codes = projection.codes();
        let similarity_loss = similarity_loss(codes.distance(), pair.label, &self.params);
        Ok(Assessment { projection, codes, label: pair.label, similarity_loss })
    }

    /// Full round on a centered pair.
    pub fn update(&mut self, pair: &PairSample) -> Result<UpdateReport> {
        let assessment = self.assess(pair)?;
        self.apply(pair, assessment)
    }

    /// Finish a round from an assessment of the same pair under the current model.
    pub fn apply(&mut self, pair: &PairSample, assessment: Assessment) -> Result<UpdateReport> {
        check_dim(self.model.dim(), pair.dim())?;
        self.steps += 1;
        let Assessment { projection, codes, label, similarity_loss: r } = assessment;
        if r == 0.0 {
            return Ok(UpdateReport {
                similarity_loss: 0.0,
                prediction_loss: 0.0,
                tau: 0.0,
                update_norm_sq: 0.0,
                codes,
                target: None,
                plan: None,
                updated: false,
                degenerate: false,
            });
        }

        let (target, plan) = infer_from_projection(&self.model, &projection, &codes, label, &self.params)?;

        // H - G only involves flipped bits: each contributes 2·h[k]·w_kᵀx_side.
        let mut margin = 0.0;
        for f in plan.flips() {
            margin += match f.side {
                Side::I => 2.0 * codes.i.sign(f.bit) * projection.i[f.bit],
                Side::J => 2.0 * codes.j.sign(f.bit) * projection.j[f.bit],
            };
        }
        let ell = margin + r.sqrt();

        // One flip per bit, each changing a sign by ±2: ‖𝕩(𝕘-𝕙)ᵀ‖² = 4(a‖x_i‖² + b‖x_j‖²).
        let norm_i: f64 = pair.xi.iter().map(|v| v * v).sum();
        let norm_j: f64 = pair.xj.iter().map(|v| v * v).sum();
        let denom = 4.0 * (plan.count(Side::I) as f64 * norm_i + plan.count(Side::J) as f64 * norm_j);

        if denom == 0.0 {
            log::debug!("degenerate update: flipped sides carry zero vectors");
            return Ok(UpdateReport {
                similarity_loss: r,
                prediction_loss: ell,
                tau: 0.0,
                update_norm_sq: 0.0,
                codes,
                target: Some(target),
                plan: Some(plan),
                updated: false,
                degenerate: true,
            });
        }

        let tau = self.c.min(ell / denom);
        for f in plan.flips() {
            // g[k] - h[k] = -2·h[k] on the flipped side
            let (x, sign) = match f.side {
                Side::I => (&pair.xi, codes.i.sign(f.bit)),
                Side::J => (&pair.xj, codes.j.sign(f.bit)),
            };
            let scale = -2.0 * tau * sign;
            for (w, v) in self.model.column_mut(f.bit).iter_mut().zip(x) {
                *w += scale * v;
            }
        }
        self.updates += 1;

        Ok(UpdateReport {
            similarity_loss: r,
            prediction_loss: ell,
            tau,
            update_norm_sq: denom,
            codes,
            target: Some(target),
            plan: Some(plan),
            updated: true,
            degenerate: false,
        })
    }

    pub fn heap_bytes(&self) -> usize {
        self.model.heap_bytes()
    }
}

/// Single-model online hashing: centering pipeline plus one learner.
#[derive(Clone, Debug)]
pub struct Trainer {
    config: TrainerConfig,
    pipeline: FeaturePipeline,
    learner: OnlineHasher,
}

impl Trainer {
    pub fn new(config: TrainerConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        let pipeline = FeaturePipeline::new(
            input_dim,
            config.warmup,
            config.kernel.then_some(config.sigma),
        )?;
        let model = HashModel::init_lsh(pipeline.feature_dim(), config.bits, config.seed)?;
        let learner = OnlineHasher::new(model, config.loss_params()?, config.c)?;
        Ok(Trainer { config, pipeline, learner })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn pipeline(&self) -> &FeaturePipeline {
        &self.pipeline
    }

    pub fn learner(&self) -> &OnlineHasher {
        &self.learner
    }

    pub fn model(&self) -> &HashModel {
        self.learner.model()
    }

    pub fn is_ready(&self) -> bool {
        self.pipeline.is_ready()
    }

    pub fn ingest_warmup(&mut self, x: &[f64]) -> Result<()> {
        self.pipeline.ingest_warmup(x)
    }

    /// One round on a raw pair: map, center, encode, and update if the loss is positive.
    pub fn step(&mut self, pair: &PairSample) -> Result<UpdateReport> {
        let (xi, xj) = self.pipeline.center_pair(&pair.xi, &pair.xj)?;
        let centered = PairSample { xi, xj, label: pair.label };
        self.learner.update(&centered)
    }

    pub fn snapshot(&self) -> Result<ModelSnapshot> {
        ModelSnapshot::from_parts(&self.pipeline, vec![self.learner.model().clone()])
    }

    /// Heap bytes held by the state; independent of the number of steps.
    pub fn heap_bytes(&self) -> usize {
        self.pipeline.heap_bytes() + self.learner.heap_bytes()
    }
}
