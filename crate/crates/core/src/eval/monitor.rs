use crate::error::{check_dim, Error, Result};
use crate::loss::{prediction_loss, PairSample};
use crate::model::HashModel;
use crate::trainer::UpdateReport;
use crate::ensemble::EnsembleReport;

#[derive(Clone, Debug)]
struct Comparator {
    model: HashModel,
    initial_gap: f64,
    loss_sum: f64,
    weighted_loss_sum: f64,
}

/// Running accumulators for the cumulative similarity-loss bound of one learner.
///
/// With a comparator `U` registered, the monitor also tracks `Σℓ_U` (the prediction
/// loss of `U` on the learner's code pairs) and exposes
/// `bound = F²(‖U - W¹‖² + 2C·Σℓ_U)` and `slack = bound - ΣR`.
#[derive(Clone, Debug)]
pub struct BoundMonitor {
    c: f64,
    steps: u64,
    cumulative_r: f64,
    f2: f64,
    c_floor: f64,
    comparator: Option<Comparator>,
}

impl BoundMonitor {
    pub fn new(c: f64) -> Self {
        BoundMonitor { c, steps: 0, cumulative_r: 0.0, f2: 0.0, c_floor: 0.0, comparator: None }
    }

    /// Register `u` against the learner's initial matrix.
    pub fn register_comparator(&mut self, u: HashModel, initial: &HashModel) -> Result<()> {
        let initial_gap = u.distance_sq(initial)?;
        self.comparator = Some(Comparator { model: u, initial_gap, loss_sum: 0.0, weighted_loss_sum: 0.0 });
        Ok(())
    }

    /// Account for one round. `pair` is the centered pair the learner saw; it is only
    /// needed when a comparator is registered.
    pub fn observe(&mut self, report: &UpdateReport, pair: Option<&PairSample>) -> Result<()> {
        self.steps += 1;
        let r = report.similarity_loss;
        if r <= 0.0 {
            return Ok(());
        }
        self.cumulative_r += r;
        if !report.degenerate {
            self.f2 = self.f2.max(report.update_norm_sq);
        }
        if self.f2 > 0.0 {
            self.c_floor = self.c_floor.max(r.sqrt() / self.f2);
        }
        if let Some(cmp) = &mut self.comparator {
            let pair = pair.ok_or_else(|| Error::invalid("comparator monitoring needs the centered pair"))?;
            let target = report
                .target
                .as_ref()
                .ok_or_else(|| Error::contract("report with positive loss lacks target codes"))?;
            check_dim(cmp.model.dim(), pair.dim())?;
            let ell = prediction_loss(&cmp.model, pair, &report.codes, target, r)?;
            cmp.loss_sum += ell;
            cmp.weighted_loss_sum += report.tau * ell;
        }
        Ok(())
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn cumulative_r(&self) -> f64 {
        self.cumulative_r
    }

    pub fn f2(&self) -> f64 {
        self.f2
    }

    /// Largest `√R / F²` seen so far; the bound assumes `C` at least this large.
    pub fn c_floor(&self) -> f64 {
        self.c_floor
    }

    pub fn c_satisfied(&self) -> bool {
        self.c >= self.c_floor
    }

    pub fn has_comparator(&self) -> bool {
        self.comparator.is_some()
    }

    /// `‖U - W¹‖²_F`.
    pub fn initial_gap(&self) -> Option<f64> {
        self.comparator.as_ref().map(|c| c.initial_gap)
    }

    /// `Σℓ_U`.
    pub fn comparator_loss(&self) -> Option<f64> {
        self.comparator.as_ref().map(|c| c.loss_sum)
    }

    /// `F²(‖U - W¹‖² + 2C·Σℓ_U)`.
    pub fn bound(&self) -> Option<f64> {
        self.comparator
            .as_ref()
            .map(|c| self.f2 * (c.initial_gap + 2.0 * self.c * c.loss_sum))
    }

    /// `F²(‖U - W¹‖² + 2·Σ τℓ_U)`, which holds for any comparator as long as `C ≥ c_floor`.
    pub fn step_weighted_bound(&self) -> Option<f64> {
        self.comparator
            .as_ref()
            .map(|c| self.f2 * (c.initial_gap + 2.0 * c.weighted_loss_sum))
    }

    pub fn slack(&self) -> Option<f64> {
        self.bound().map(|b| b - self.cumulative_r)
    }

    pub fn csv_header() -> &'static str {
        "step,cumulative_R,F2,slack,mAP"
    }

    pub fn csv_row(&self, map: Option<f64>) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!("{},{},{},{},{}", self.steps, self.cumulative_r, self.f2, opt(self.slack()), opt(map))
    }
}

/// One [`BoundMonitor`] per ensemble member plus the ensemble-level bound
/// `Σ_t Σ_m R*_m ≤ T · max F² · (max ‖U - W¹_m‖² + 2C · max Σℓ_U)`.
#[derive(Clone, Debug)]
pub struct EnsembleBoundMonitor {
    members: Vec<BoundMonitor>,
    steps: u64,
    total_r_star: f64,
}

impl EnsembleBoundMonitor {
    pub fn new(c: f64, models: usize) -> Self {
        EnsembleBoundMonitor { members: vec![BoundMonitor::new(c); models], steps: 0, total_r_star: 0.0 }
    }

    pub fn register_comparator(&mut self, u: &HashModel, initial: &[HashModel]) -> Result<()> {
        check_dim(self.members.len(), initial.len())?;
        for (m, w) in self.members.iter_mut().zip(initial) {
            m.register_comparator(u.clone(), w)?;
        }
        Ok(())
    }

    pub fn observe(&mut self, report: &EnsembleReport, pair: Option<&PairSample>) -> Result<()> {
        check_dim(self.members.len(), report.reports.len())?;
        self.steps += 1;
        self.total_r_star += report.r_star.iter().sum::<f64>();
        for (m, r) in self.members.iter_mut().zip(&report.reports) {
            if let Some(r) = r {
                m.observe(r, pair)?;
            }
        }
        Ok(())
    }

    pub fn members(&self) -> &[BoundMonitor] {
        &self.members
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `Σ_t Σ_m R*_m`.
    pub fn total_r_star(&self) -> f64 {
        self.total_r_star
    }

    pub fn f2(&self) -> f64 {
        self.members.iter().map(BoundMonitor::f2).fold(0.0, f64::max)
    }

    pub fn c_floor(&self) -> f64 {
        self.members.iter().map(BoundMonitor::c_floor).fold(0.0, f64::max)
    }

    pub fn bound(&self) -> Option<f64> {
        let c = self.members.first()?.c();
        let mut gap = 0.0f64;
        let mut loss = f64::NEG_INFINITY;
        for m in &self.members {
            gap = gap.max(m.initial_gap()?);
            loss = loss.max(m.comparator_loss()?);
        }
        Some(self.members.len() as f64 * self.f2() * (gap + 2.0 * c * loss))
    }

    pub fn slack(&self) -> Option<f64> {
        self.bound().map(|b| b - self.total_r_star)
    }

    pub fn csv_row(&self, map: Option<f64>) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!("{},{},{},{},{}", self.steps, self.total_r_star, self.f2(), opt(self.slack()), opt(map))
    }
}
