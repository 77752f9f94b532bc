//! Similarity loss on code pairs and the structured prediction loss that drives updates.

use crate::code::CodePair;
use crate::error::{check_dim, Error, Result};
use crate::model::{signed_sum, HashModel};

/// Pair label: similar (+1) or dissimilar (-1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Similar,
    Dissimilar,
}

impl Label {
    pub fn from_sign(s: i32) -> Result<Self> {
        match s {
            1 => Ok(Label::Similar),
            -1 => Ok(Label::Dissimilar),
            other => Err(Error::invalid(format!("label must be ±1, got {other}"))),
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Label::Similar => 1,
            Label::Dissimilar => -1,
        }
    }
}

/// Thresholds of the similarity loss for codes of length `bits`.
///
/// Similar pairs may differ in at most `alpha` bits; dissimilar pairs must differ
/// in at least `beta * bits`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParams {
    alpha: u32,
    beta: f64,
    bits: usize,
}

impl LossParams {
    pub fn new(alpha: u32, beta: f64, bits: usize) -> Result<Self> {
        if bits == 0 {
            return Err(Error::invalid("code length must be positive"));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0, 1], got {beta}")));
        }
        if alpha as usize >= bits {
            return Err(Error::invalid(format!(
                "alpha must be below the code length {bits}, got {alpha}"
            )));
        }
        let params = LossParams { alpha, beta, bits };
        if params.dissimilar_margin() <= alpha as f64 {
            return Err(Error::invalid(format!(
                "beta * r must exceed alpha (beta={beta}, r={bits}, alpha={alpha})"
            )));
        }
        Ok(params)
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// `beta * r`. Products within 1e-9 (relative) of an integer snap to it, so
    /// that e.g. 0.3 * 10 is exactly 3.
    pub fn dissimilar_margin(&self) -> f64 {
        let m = self.beta * self.bits as f64;
        let rounded = m.round();
        if (m - rounded).abs() <= 1e-9 * rounded.max(1.0) {
            rounded
        } else {
            m
        }
    }

    /// `⌈beta * r⌉`, the target distance when repairing a dissimilar pair.
    pub fn dissimilar_target(&self) -> u32 {
        self.dissimilar_margin().ceil() as u32
    }
}

/// Two feature vectors and their label.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub xi: Vec<f64>,
    pub xj: Vec<f64>,
    pub label: Label,
}

impl PairSample {
    pub fn new(xi: Vec<f64>, xj: Vec<f64>, label: Label) -> Result<Self> {
        check_dim(xi.len(), xj.len())?;
        if xi.iter().chain(&xj).any(|v| !v.is_finite()) {
            return Err(Error::invalid("pair sample has non-finite entries"));
        }
        Ok(PairSample { xi, xj, label })
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }
}

/// Loss of a pair at Hamming distance `distance` under label `label`.
pub fn similarity_loss(distance: u32, label: Label, params: &LossParams) -> f64 {
    match label {
        Label::Similar => distance.saturating_sub(params.alpha) as f64,
        Label::Dissimilar => (params.dissimilar_margin() - distance as f64).max(0.0),
    }
}

pub fn similarity_loss_codes(codes: &CodePair, label: Label, params: &LossParams) -> f64 {
    similarity_loss(codes.distance(), label, params)
}

/// `c_iᵀWᵀx_i + c_jᵀWᵀx_j`.
pub fn pair_score(model: &HashModel, pair: &PairSample, codes: &CodePair) -> Result<f64> {
    check_dim(model.bits(), codes.len())?;
    let pi = model.project(&pair.xi)?;
    let pj = model.project(&pair.xj)?;
    Ok(signed_sum(&pi, &codes.i) + signed_sum(&pj, &codes.j))
}

/// Structured loss `score(h) - score(g) + sqrt(R)`.
///
/// `h` is the model's own code pair, `g` the zero-loss target and `similarity`
/// the similarity loss of `h`.
pub fn prediction_loss(
    model: &HashModel,
    pair: &PairSample,
    h: &CodePair,
    g: &CodePair,
    similarity: f64,
) -> Result<f64> {
    if similarity < 0.0 || similarity.is_nan() {
        return Err(Error::invalid(format!(
            "similarity loss must be non-negative, got {similarity}"
        )));
    }
    check_dim(h.len(), g.len())?;
    Ok(pair_score(model, pair, h)? - pair_score(model, pair, g)? + similarity.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::HashCode;
    use crate::model::RngSeed;
    use rand::Rng;

    fn params(alpha: u32, beta: f64, r: usize) -> LossParams {
        LossParams::new(alpha, beta, r).unwrap()
    }

    #[test]
    fn similarity_loss_examples() {
        let p = params(0, 0.5, 8);
        assert_eq!(similarity_loss(0, Label::Similar, &p), 0.0);
        assert_eq!(similarity_loss(3, Label::Similar, &p), 3.0);
        assert_eq!(similarity_loss(2, Label::Dissimilar, &p), 2.0);
    }

    #[test]
    fn zero_loss_region_is_exact() {
        for &(alpha, beta, r) in &[(0u32, 0.5, 8usize), (2, 0.4, 48), (1, 0.35, 10), (0, 1.0, 5)] {
            let p = params(alpha, beta, r);
            for d in 0..=r as u32 {
                let sim_zero = similarity_loss(d, Label::Similar, &p) == 0.0;
                assert_eq!(sim_zero, d <= alpha);
                let dis_zero = similarity_loss(d, Label::Dissimilar, &p) == 0.0;
                assert_eq!(dis_zero, d as f64 >= beta * r as f64 - 1e-9);
                assert!(similarity_loss(d, Label::Dissimilar, &p) >= 0.0);
            }
        }
    }

    #[test]
    fn fractional_margin_is_kept() {
        let p = params(0, 0.4, 48);
        assert!((p.dissimilar_margin() - 19.2).abs() < 1e-12);
        assert_eq!(p.dissimilar_target(), 20);
        assert!((similarity_loss(10, Label::Dissimilar, &p) - 9.2).abs() < 1e-12);
    }

    #[test]
    fn near_integer_margin_snaps() {
        let p = params(0, 0.3, 10);
        assert_eq!(p.dissimilar_margin(), 3.0);
        assert_eq!(p.dissimilar_target(), 3);
        assert_eq!(similarity_loss(3, Label::Dissimilar, &p), 0.0);
    }

    #[test]
    fn invalid_params_are_refused() {
        assert!(LossParams::new(5, 0.01, 64).is_err());
        assert!(LossParams::new(0, 0.0, 8).is_err());
        assert!(LossParams::new(0, 1.5, 8).is_err());
        assert!(LossParams::new(8, 1.0, 8).is_err());
        assert!(LossParams::new(4, 0.5, 8).is_err());
        assert!(LossParams::new(3, 0.5, 8).is_ok());
    }

    #[test]
    fn label_conversion() {
        assert_eq!(Label::from_sign(1).unwrap(), Label::Similar);
        assert_eq!(Label::from_sign(-1).unwrap().sign(), -1);
        assert!(Label::from_sign(0).is_err());
    }

    fn random_pair(seed: u64, d: usize) -> PairSample {
        let mut rng = RngSeed(seed).rng();
        let xi = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xj = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        PairSample::new(xi, xj, Label::Similar).unwrap()
    }

    #[test]
    fn pair_score_of_own_codes_is_sum_of_l1_norms() {
        let m = HashModel::init_lsh(5, 12, RngSeed(9)).unwrap();
        let pair = random_pair(10, 5);
        let h = CodePair::new(m.encode(&pair.xi).unwrap(), m.encode(&pair.xj).unwrap()).unwrap();
        let l1 = |x: &[f64]| m.project(x).unwrap().iter().map(|v| v.abs()).sum::<f64>();
        let expected = l1(&pair.xi) + l1(&pair.xj);
        let score = pair_score(&m, &pair, &h).unwrap();
        assert!((score - expected).abs() < 1e-12);
        assert!((pair_score(&m, &pair, &h.negated()).unwrap() + expected).abs() < 1e-12);
    }

    #[test]
    fn pair_score_matches_explicit_matrix_products() {
        let m = HashModel::init_lsh(5, 12, RngSeed(11)).unwrap();
        let pair = random_pair(12, 5);
        let mut rng = RngSeed(13).rng();
        let ci: Vec<i8> = (0..12).map(|_| if rng.random() { 1 } else { -1 }).collect();
        let cj: Vec<i8> = (0..12).map(|_| if rng.random() { 1 } else { -1 }).collect();
        let codes = CodePair::new(
            HashCode::from_signs(&ci).unwrap(),
            HashCode::from_signs(&cj).unwrap(),
        )
        .unwrap();
        // c^T (W^T x) written out entry by entry.
        let mut expected = 0.0;
        for k in 0..12 {
            let mut wi = 0.0;
            let mut wj = 0.0;
            for p in 0..5 {
                wi += m.weights()[k * 5 + p] * pair.xi[p];
                wj += m.weights()[k * 5 + p] * pair.xj[p];
            }
            expected += ci[k] as f64 * wi + cj[k] as f64 * wj;
        }
        assert!((pair_score(&m, &pair, &codes).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn prediction_loss_trivial_cases() {
        let m = HashModel::init_lsh(4, 6, RngSeed(1)).unwrap();
        let pair = random_pair(2, 4);
        let h = CodePair::new(m.encode(&pair.xi).unwrap(), m.encode(&pair.xj).unwrap()).unwrap();
        assert_eq!(prediction_loss(&m, &pair, &h, &h, 0.0).unwrap(), 0.0);
        assert!((prediction_loss(&m, &pair, &h, &h, 9.0).unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(
            prediction_loss(&m, &pair, &h, &h, -1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn prediction_loss_grows_with_similarity_loss() {
        let m = HashModel::init_lsh(4, 6, RngSeed(3)).unwrap();
        let pair = random_pair(4, 4);
        let h = CodePair::new(m.encode(&pair.xi).unwrap(), m.encode(&pair.xj).unwrap()).unwrap();
        let g = CodePair::new(h.i.negated(), h.j.clone()).unwrap();
        let mut prev = prediction_loss(&m, &pair, &h, &g, 0.0).unwrap();
        assert!(prev >= 0.0);
        for r in 1..10 {
            let cur = prediction_loss(&m, &pair, &h, &g, r as f64).unwrap();
            assert!(cur > prev);
            assert!(cur >= (r as f64).sqrt());
            prev = cur;
        }
    }
}
