//! Zero-loss code pair inference.
//!
//! Given the model's codes `h` for a pair with positive similarity loss, build the
//! closest code pair `g` with zero loss by flipping exactly `p0` bits, one side per
//! bit. Dissimilar pairs flip `⌈βr⌉ - D_h` of the agreeing bits; similar pairs flip
//! `D_h - α` of the disagreeing bits. Among candidates the bits with the smallest
//! potential loss `δ_k = min(h_i[k]·w_kᵀx_i, h_j[k]·w_kᵀx_j)` are chosen, ties by
//! ascending bit index, and each is flipped on the side attaining the minimum
//! (side `i` on equality).

use std::cmp::Ordering;

use crate::code::CodePair;
use crate::error::{check_dim, Error, Result};
use crate::loss::{similarity_loss, Label, LossParams, PairSample};
use crate::model::HashModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    I,
    J,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Flip {
    pub bit: usize,
    pub side: Side,
}

/// Potential loss of one candidate bit and the side that attains it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BitDelta {
    pub bit: usize,
    pub delta: f64,
    pub side: Side,
}

/// The flips turning `h` into `g`. At most one flip per bit; sorted by bit index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlipPlan {
    flips: Vec<Flip>,
    zero_columns: Vec<usize>,
}

impl FlipPlan {
    pub fn flips(&self) -> &[Flip] {
        &self.flips
    }

    /// Number of flipped bits.
    pub fn p0(&self) -> usize {
        self.flips.len()
    }

    pub fn count(&self, side: Side) -> usize {
        self.flips.iter().filter(|f| f.side == side).count()
    }

    /// Selected bits whose projection column was all-zero.
    pub fn zero_columns(&self) -> &[usize] {
        &self.zero_columns
    }

    pub fn bits(&self) -> impl Iterator<Item = usize> + '_ {
        self.flips.iter().map(|f| f.bit)
    }
}

/// `Wᵀx_i` and `Wᵀx_j` for one pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairProjection {
    pub i: Vec<f64>,
    pub j: Vec<f64>,
}

impl PairProjection {
    pub fn compute(model: &HashModel, pair: &PairSample) -> Result<Self> {
        Ok(PairProjection {
            i: model.project(&pair.xi)?,
            j: model.project(&pair.xj)?,
        })
    }

    pub fn codes(&self) -> CodePair {
        CodePair {
            i: crate::code::HashCode::from_signs_of(&self.i),
            j: crate::code::HashCode::from_signs_of(&self.j),
        }
    }
}

fn bit_delta(proj: &PairProjection, h: &CodePair, k: usize) -> BitDelta {
    let a = h.i.sign(k) * proj.i[k];
    let b = h.j.sign(k) * proj.j[k];
    if a <= b {
        BitDelta { bit: k, delta: a, side: Side::I }
    } else {
        BitDelta { bit: k, delta: b, side: Side::J }
    }
}

/// `δ_k` and its side for every bit in `candidates`.
pub fn delta_scores(
    model: &HashModel,
    pair: &PairSample,
    h: &CodePair,
    candidates: &[usize],
) -> Result<Vec<BitDelta>> {
    check_dim(model.bits(), h.len())?;
    if let Some(&k) = candidates.iter().find(|&&k| k >= model.bits()) {
        return Err(Error::invalid(format!("candidate bit {k} out of range")));
    }
    let proj = PairProjection::compute(model, pair)?;
    Ok(candidates.iter().map(|&k| bit_delta(&proj, h, k)).collect())
}

fn by_delta_then_bit(a: &BitDelta, b: &BitDelta) -> Ordering {
    a.delta.total_cmp(&b.delta).then(a.bit.cmp(&b.bit))
}

/// Zero-loss codes for a pair the model currently gets wrong.
pub fn infer_zero_loss_codes(
    model: &HashModel,
    pair: &PairSample,
    h: &CodePair,
    label: Label,
    params: &LossParams,
) -> Result<(CodePair, FlipPlan)> {
    check_dim(model.bits(), h.len())?;
    let proj = PairProjection::compute(model, pair)?;
    infer_from_projection(model, &proj, h, label, params)
}

/// As [`infer_zero_loss_codes`] with the projections already computed.
pub fn infer_from_projection(
    model: &HashModel,
    proj: &PairProjection,
    h: &CodePair,
    label: Label,
    params: &LossParams,
) -> Result<(CodePair, FlipPlan)> {
    check_dim(params.bits(), h.len())?;
    let distance = h.distance();
    if similarity_loss(distance, label, params) == 0.0 {
        return Err(Error::contract(
            "zero-loss inference requested for a pair that already has zero loss",
        ));
    }

    let (candidates, p0) = match label {
        Label::Dissimilar => (
            h.i.positions(&h.j, true),
            (params.dissimilar_target() - distance) as usize,
        ),
        Label::Similar => (h.i.positions(&h.j, false), (distance - params.alpha()) as usize),
    };
    if p0 > candidates.len() {
        return Err(Error::contract(format!(
            "need {p0} flips but only {} candidate bits",
            candidates.len()
        )));
    }

    let mut deltas: Vec<BitDelta> = candidates.iter().map(|&k| bit_delta(proj, h, k)).collect();
    if p0 < deltas.len() {
        deltas.select_nth_unstable_by(p0 - 1, by_delta_then_bit);
        deltas.truncate(p0);
    }
    deltas.sort_unstable_by_key(|d| d.bit);

    let mut g = h.clone();
    let mut zero_columns = Vec::new();
    let flips = deltas
        .iter()
        .map(|d| {
            match d.side {
                Side::I => g.i.flip(d.bit),
                Side::J => g.j.flip(d.bit),
            }
            if d.delta == 0.0 && model.column(d.bit).iter().all(|&w| w == 0.0) {
                zero_columns.push(d.bit);
            }
            Flip { bit: d.bit, side: d.side }
        })
        .collect();
    if !zero_columns.is_empty() {
        log::warn!("zero-loss inference selected all-zero projection columns {zero_columns:?}");
    }
    Ok((g, FlipPlan { flips, zero_columns }))
}
