//! End-to-end workflows behind the command line: train, encode, query, evaluate.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::ensemble::Ensemble;
use crate::error::{check_dim, Error, Result};
use crate::eval::synthetic::permutation;
use crate::eval::{
    linear_scan_multi, mean_average_precision, pair_stream, EnsembleBoundMonitor, GroundTruth,
    IndexedPair, LabelOracle, LabelPolicy, MapReport, Neighbor,
};
use crate::format::CodeTable;
use crate::snapshot::ModelSnapshot;
use crate::trainer::TrainerConfig;

/// Stream indices for seeds derived from the user seed.
const PAIR_STREAM: u64 = 1 << 32;
const WARMUP_STREAM: u64 = (1 << 32) + 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub config: TrainerConfig,
    pub models: usize,
    pub pairs: usize,
    pub balance: Option<f64>,
    pub policy: LabelPolicy,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            config: TrainerConfig::default(),
            models: 1,
            pairs: 10_000,
            balance: None,
            policy: LabelPolicy::Class,
        }
    }
}

/// One row of the training metrics CSV. For ensembles `r` sums the losses of the
/// models that ran, `ell` the prediction losses of the updated models, `tau` is
/// the largest step and `updated` counts updated models.
#[derive(Clone, Debug, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub r: f64,
    pub ell: f64,
    pub tau: f64,
    pub cum_r: f64,
    pub updated: usize,
}

impl StepMetrics {
    pub const CSV_HEADER: &'static str = "step,R,ell,tau,cumR,updated";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.step, self.r, self.ell, self.tau, self.cum_r, self.updated)
    }
}

pub struct TrainOutcome {
    pub snapshot: ModelSnapshot,
    pub metrics: Vec<StepMetrics>,
    pub monitor: EnsembleBoundMonitor,
}

/// Pairs drawn for `opts`; identical to the stream `train` consumes.
pub fn pairgen(data: &Dataset, pairs: usize, seed: crate::model::RngSeed, balance: Option<f64>, policy: LabelPolicy) -> Result<Vec<IndexedPair>> {
    let oracle = LabelOracle::new(data, policy)?;
    pair_stream(&oracle, pairs, seed.derive(PAIR_STREAM), balance)
}

/// Train on `data`, calling `observe` after every round.
///
/// The warmup set is the first `min(warmup, n)` rows of a seeded permutation.
pub fn train_with(
    data: &Dataset,
    opts: &TrainOptions,
    mut observe: impl FnMut(&StepMetrics, &EnsembleBoundMonitor) -> Result<()>,
) -> Result<(ModelSnapshot, EnsembleBoundMonitor)> {
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid(format!("training needs at least two rows, got {n}")));
    }
    let mut config = opts.config.clone();
    if config.warmup > n {
        log::warn!("warmup {} exceeds dataset size {n}; using {n}", config.warmup);
        config.warmup = n;
    }
    config.validate()?;
    let pairs = pairgen(data, opts.pairs, config.seed, opts.balance, opts.policy)?;
    let mut ensemble = Ensemble::new(config.clone(), data.dim(), opts.models)?;
    for &i in &permutation(n, config.seed.derive(WARMUP_STREAM))[..config.warmup] {
        ensemble.ingest_warmup(data.row(i))?;
    }
    let mut monitor = EnsembleBoundMonitor::new(config.c, opts.models);
    let mut cum_r = 0.0;
    for (t, p) in pairs.iter().enumerate() {
        let report = ensemble.step(&data.pair(p))?;
        monitor.observe(&report, None)?;
        let r: f64 = report.r_star.iter().sum();
        cum_r += r;
        let mut row = StepMetrics { step: t as u64 + 1, r, ell: 0.0, tau: 0.0, cum_r, updated: 0 };
        for rep in report.reports.iter().flatten().filter(|r| r.updated) {
            row.ell += rep.prediction_loss;
            row.tau = row.tau.max(rep.tau);
            row.updated += 1;
        }
        observe(&row, &monitor)?;
    }
    if monitor.c_floor() > config.c {
        log::info!("C = {} is below the observed floor {:.4}", config.c, monitor.c_floor());
    }
    Ok((ensemble.snapshot()?, monitor))
}

pub fn train(data: &Dataset, opts: &TrainOptions) -> Result<TrainOutcome> {
    let mut metrics = Vec::with_capacity(opts.pairs);
    let (snapshot, monitor) = train_with(data, opts, |m, _| {
        metrics.push(m.clone());
        Ok(())
    })?;
    Ok(TrainOutcome { snapshot, metrics, monitor })
}

pub fn metrics_csv(metrics: &[StepMetrics]) -> String {
    let mut out = String::from(StepMetrics::CSV_HEADER);
    out.push('\n');
    for m in metrics {
        out.push_str(&m.csv_row());
        out.push('\n');
    }
    out
}

/// Codes of every row under every model.
pub fn encode_dataset(snapshot: &ModelSnapshot, data: &Dataset) -> Result<CodeTable> {
    if !data.is_empty() {
        check_dim(snapshot.input_dim(), data.dim())?;
    }
    let codes = snapshot.encode_rows(data.values())?;
    CodeTable::new(snapshot.bits(), snapshot.model_count(), codes)
}

/// Top-`k` database items for each query (all items when `k` exceeds the database).
pub fn query(snapshot: &ModelSnapshot, table: &CodeTable, queries: &Dataset, k: usize) -> Result<Vec<Vec<Neighbor>>> {
    check_dim(snapshot.bits(), table.bits)?;
    check_dim(snapshot.model_count(), table.models)?;
    check_dim(snapshot.input_dim(), queries.dim())?;
    if k > table.len() {
        log::warn!("k = {k} exceeds database size {}; returning {}", table.len(), table.len());
    }
    queries
        .values()
        .par_chunks(queries.dim())
        .map(|x| {
            let codes = snapshot.encode(x)?;
            let mut ranked = linear_scan_multi(&codes, &table.codes)?;
            ranked.truncate(k);
            Ok(ranked)
        })
        .collect()
}

pub fn query_tsv(results: &[Vec<Neighbor>]) -> String {
    let mut out = String::new();
    for (q, ranked) in results.iter().enumerate() {
        for (rank, nb) in ranked.iter().enumerate() {
            let _ = writeln!(out, "{q}\t{}\t{}\t{}", rank + 1, nb.index, nb.distance);
        }
    }
    out
}

/// mAP of `queries` against `database` under `policy`, using full Hamming rankings.
pub fn evaluate(snapshot: &ModelSnapshot, database: &Dataset, queries: &Dataset, policy: LabelPolicy) -> Result<MapReport> {
    let truth = GroundTruth::from_policy(queries, database, policy)?;
    let table = encode_dataset(snapshot, database)?;
    let rankings = query(snapshot, &table, queries, table.len())?
        .into_iter()
        .map(|r| r.into_iter().map(|nb| nb.index).collect())
        .collect::<Vec<Vec<usize>>>();
    mean_average_precision(&rankings, &truth)
}

pub fn ap_csv(report: &MapReport) -> String {
    let mut out = String::from("query,AP\n");
    for (q, ap) in report.per_query.iter().enumerate() {
        let _ = writeln!(out, "{q},{}", ap.map(|v| v.to_string()).unwrap_or_default());
    }
    out
}
