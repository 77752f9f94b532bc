//! Multi-model online hashing.
//!
//! `T` independently initialized learners share one centering pipeline. A similar
//! pair updates only the learner with the smallest similarity loss (lowest index on
//! ties); a dissimilar pair updates every learner whose loss is positive. At query
//! time an item's distance is the minimum Hamming distance over the `T` models.

use crate::code::HashCode;
use crate::error::{Error, Result};
use crate::loss::{Label, PairSample};
use crate::model::HashModel;
use crate::snapshot::ModelSnapshot;
use crate::trainer::{FeaturePipeline, OnlineHasher, TrainerConfig, UpdateReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    One(usize),
    All,
}

#[derive(Clone, Debug)]
pub struct EnsembleReport {
    /// Similarity loss of every model before the round.
    pub losses: Vec<f64>,
    pub selected: Selection,
    /// Reports of the models that ran a step; `None` for the others.
    pub reports: Vec<Option<UpdateReport>>,
    /// Per-model loss counted toward the cumulative bound: the model's loss when it
    /// was selected for this round, 0 otherwise.
    pub r_star: Vec<f64>,
}

impl EnsembleReport {
    pub fn updated_models(&self) -> impl Iterator<Item = usize> + '_ {
        self.reports
            .iter()
            .enumerate()
            .filter(|(_, r)| r.as_ref().is_some_and(|r| r.updated))
            .map(|(m, _)| m)
    }
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    config: TrainerConfig,
    pipeline: FeaturePipeline,
    learners: Vec<OnlineHasher>,
}

impl Ensemble {
    /// `models` learners; learner `m` is initialized from `config.seed.derive(m)`,
    /// so learner 0 matches a single [`Trainer`](crate::trainer::Trainer) with the same config.
    pub fn new(config: TrainerConfig, input_dim: usize, models: usize) -> Result<Self> {
        config.validate()?;
        if models == 0 {
            return Err(Error::invalid("ensemble needs at least one model"));
        }
        let pipeline = FeaturePipeline::new(
            input_dim,
            config.warmup,
            config.kernel.then_some(config.sigma),
        )?;
        let params = config.loss_params()?;
        let learners = (0..models)
            .map(|m| {
                let model = HashModel::init_lsh(
                    pipeline.feature_dim(),
                    config.bits,
                    config.seed.derive(m as u64),
                )?;
                OnlineHasher::new(model, params, config.c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble { config, pipeline, learners })
    }

    /// Ensemble over explicitly given learners, already past warmup.
    pub fn from_learners(config: TrainerConfig, pipeline: FeaturePipeline, learners: Vec<OnlineHasher>) -> Result<Self> {
        if learners.is_empty() {
            return Err(Error::invalid("ensemble needs at least one model"));
        }
        Ok(Ensemble { config, pipeline, learners })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.learners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.learners.is_empty()
    }

    pub fn learners(&self) -> &[OnlineHasher] {
        &self.learners
    }

    pub fn pipeline(&self) -> &FeaturePipeline {
        &self.pipeline
    }

    pub fn is_ready(&self) -> bool {
        self.pipeline.is_ready()
    }

    pub fn ingest_warmup(&mut self, x: &[f64]) -> Result<()> {
        self.pipeline.ingest_warmup(x)
    }

    /// One round on a raw pair; the pair is centered once for all models.
    pub fn step(&mut self, pair: &PairSample) -> Result<EnsembleReport> {
        let (xi, xj) = self.pipeline.center_pair(&pair.xi, &pair.xj)?;
        self.step_centered(&PairSample { xi, xj, label: pair.label })
    }

    /// One round on a pair that is already in centered feature space.
    pub fn step_centered(&mut self, pair: &PairSample) -> Result<EnsembleReport> {
        let t = self.learners.len();
        let assessments = self
            .learners
            .iter()
            .map(|l| l.assess(pair))
            .collect::<Result<Vec<_>>>()?;
        let losses: Vec<f64> = assessments.iter().map(|a| a.similarity_loss).collect();
        let mut reports: Vec<Option<UpdateReport>> = vec![None; t];
        let mut r_star = vec![0.0; t];

        let selected = match pair.label {
            Label::Similar => {
                let mut best = 0;
                for (m, &loss) in losses.iter().enumerate() {
                    if loss < losses[best] {
                        best = m;
                    }
                }
                let assessment = assessments.into_iter().nth(best).expect("index in range");
                reports[best] = Some(self.learners[best].apply(pair, assessment)?);
                r_star[best] = losses[best];
                Selection::One(best)
            }
            Label::Dissimilar => {
                for (m, assessment) in assessments.into_iter().enumerate() {
                    if assessment.similarity_loss > 0.0 {
                        reports[m] = Some(self.learners[m].apply(pair, assessment)?);
                        r_star[m] = losses[m];
                    }
                }
                Selection::All
            }
        };
        Ok(EnsembleReport { losses, selected, reports, r_star })
    }

    pub fn snapshot(&self) -> Result<ModelSnapshot> {
        ModelSnapshot::from_parts(
            &self.pipeline,
            self.learners.iter().map(|l| l.model().clone()).collect(),
        )
    }

    pub fn heap_bytes(&self) -> usize {
        self.pipeline.heap_bytes() + self.learners.iter().map(OnlineHasher::heap_bytes).sum::<usize>()
    }
}

/// Minimum Hamming distance over models between an item's codes and a query's codes.
pub fn mm_distance(item: &[HashCode], query: &[HashCode]) -> Result<u32> {
    if item.len() != query.len() || item.is_empty() {
        return Err(Error::DimensionMismatch { expected: item.len(), found: query.len() });
    }
    item.iter()
        .zip(query)
        .map(|(a, b)| a.hamming(b))
        .try_fold(u32::MAX, |acc, d| d.map(|d| acc.min(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossParams;
    use crate::model::RngSeed;
    use crate::trainer::Trainer;
    use rand::Rng;

    fn codes_from_mask(mask: u64, r: usize) -> HashCode {
        let signs: Vec<i8> = (0..r).map(|k| if mask >> k & 1 == 1 { 1 } else { -1 }).collect();
        HashCode::from_signs(&signs).unwrap()
    }

    #[test]
    fn mm_distance_single_model_is_hamming() {
        let a = codes_from_mask(0b1011, 4);
        let b = codes_from_mask(0b0110, 4);
        assert_eq!(mm_distance(std::slice::from_ref(&a), std::slice::from_ref(&b)).unwrap(), a.hamming(&b).unwrap());
    }

    #[test]
    fn mm_distance_takes_the_minimum() {
        let mut rng = RngSeed(1).rng();
        for _ in 0..100 {
            let item: Vec<HashCode> = (0..3).map(|_| codes_from_mask(rng.random(), 40)).collect();
            let query: Vec<HashCode> = (0..3).map(|_| codes_from_mask(rng.random(), 40)).collect();
            let mut naive = u32::MAX;
            for m in 0..3 {
                naive = naive.min(item[m].hamming(&query[m]).unwrap());
            }
            assert_eq!(mm_distance(&item, &query).unwrap(), naive);
        }
        let same = codes_from_mask(5, 8);
        let item = vec![codes_from_mask(0, 8), same.clone()];
        let query = vec![codes_from_mask(255, 8), same];
        assert_eq!(mm_distance(&item, &query).unwrap(), 0);
        assert!(mm_distance(&item, &item[..1]).is_err());
    }

    /// Learners whose projections are coordinate selectors so that the codes of a
    /// pair, and hence each learner's loss, can be dictated exactly.
    fn scripted(losses_similar: &[u32]) -> (Ensemble, PairSample) {
        let r = 8;
        let d = 2;
        let params = LossParams::new(0, 0.5, r).unwrap();
        let config = TrainerConfig { bits: r, warmup: 1, ..Default::default() };
        let mut pipeline = FeaturePipeline::new(d, 1, None).unwrap();
        pipeline.ingest_warmup(&[0.0, 0.0]).unwrap();
        // x_i = (1, 0), x_j = (0, 1). Column k = (1, 1) gives equal codes, (1, -1) differing.
        let learners = losses_similar
            .iter()
            .map(|&want| {
                let mut w = Vec::new();
                for k in 0..r {
                    if (k as u32) < want {
                        w.extend_from_slice(&[1.0, -1.0]);
                    } else {
                        w.extend_from_slice(&[1.0, 1.0]);
                    }
                }
                OnlineHasher::new(HashModel::from_columns(d, r, w).unwrap(), params, 0.1).unwrap()
            })
            .collect();
        let ens = Ensemble::from_learners(config, pipeline, learners).unwrap();
        let pair = PairSample::new(vec![1.0, 0.0], vec![0.0, 1.0], Label::Similar).unwrap();
        (ens, pair)
    }

    #[test]
    fn similar_pair_picks_the_zero_loss_model() {
        let (mut ens, pair) = scripted(&[0, 3]);
        let before: Vec<HashModel> = ens.learners().iter().map(|l| l.model().clone()).collect();
        let rep = ens.step_centered(&pair).unwrap();
        assert_eq!(rep.losses, vec![0.0, 3.0]);
        assert_eq!(rep.selected, Selection::One(0));
        assert_eq!(rep.r_star, vec![0.0, 0.0]);
        for (l, b) in ens.learners().iter().zip(&before) {
            assert_eq!(l.model(), b);
        }
    }

    #[test]
    fn similar_pair_updates_only_the_argmin() {
        let (mut ens, pair) = scripted(&[4, 1, 7]);
        let before: Vec<HashModel> = ens.learners().iter().map(|l| l.model().clone()).collect();
        let rep = ens.step_centered(&pair).unwrap();
        assert_eq!(rep.losses, vec![4.0, 1.0, 7.0]);
        assert_eq!(rep.selected, Selection::One(1));
        assert_eq!(rep.r_star, vec![0.0, 1.0, 0.0]);
        assert_eq!(rep.updated_models().collect::<Vec<_>>(), vec![1]);
        assert_eq!(ens.learners()[0].model(), &before[0]);
        assert_eq!(ens.learners()[2].model(), &before[2]);
        let changed: Vec<usize> = (0..8)
            .filter(|&k| ens.learners()[1].model().column(k) != before[1].column(k))
            .collect();
        assert_eq!(changed.len(), 1);
    }

    #[test]
    fn argmin_ties_pick_the_lowest_index() {
        let (mut ens, pair) = scripted(&[2, 2, 2]);
        let rep = ens.step_centered(&pair).unwrap();
        assert_eq!(rep.selected, Selection::One(0));
    }

    #[test]
    fn dissimilar_pair_updates_every_violating_model() {
        // With the dissimilar label, a learner at distance 2 has loss 2 and one at distance 4 has 0.
        let (mut ens, pair) = scripted(&[2, 4]);
        let pair = PairSample { label: Label::Dissimilar, ..pair };
        let before: Vec<HashModel> = ens.learners().iter().map(|l| l.model().clone()).collect();
        let rep = ens.step_centered(&pair).unwrap();
        assert_eq!(rep.losses, vec![2.0, 0.0]);
        assert_eq!(rep.selected, Selection::All);
        assert_eq!(rep.r_star, vec![2.0, 0.0]);
        assert_ne!(ens.learners()[0].model(), &before[0]);
        assert_eq!(ens.learners()[1].model(), &before[1]);
        assert!(rep.reports[1].is_none());
    }

    #[test]
    fn single_model_ensemble_tracks_the_trainer() {
        let config = TrainerConfig { bits: 16, warmup: 8, seed: RngSeed(42), ..Default::default() };
        let mut trainer = Trainer::new(config.clone(), 6).unwrap();
        let mut ens = Ensemble::new(config, 6, 1).unwrap();
        let mut rng = RngSeed(7).rng();
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> { (0..6).map(|_| rng.random_range(-1.0..1.0)).collect() };
        for _ in 0..8 {
            let x = draw(&mut rng);
            trainer.ingest_warmup(&x).unwrap();
            ens.ingest_warmup(&x).unwrap();
        }
        for s in 0..200 {
            let label = if s % 3 == 0 { Label::Similar } else { Label::Dissimilar };
            let pair = PairSample::new(draw(&mut rng), draw(&mut rng), label).unwrap();
            trainer.step(&pair).unwrap();
            ens.step(&pair).unwrap();
            assert_eq!(trainer.model().weights(), ens.learners()[0].model().weights());
        }
    }
}
