use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::LabelOracle;
use crate::loss::Label;
use crate::model::RngSeed;

/// Draws allowed while looking for a pair of the label the balance quota asks for.
pub const MAX_ATTEMPTS_PER_PAIR: usize = 100_000;

/// A labeled pair of dataset indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexedPair {
    pub i: usize,
    pub j: usize,
    pub label: Label,
}

fn draw(rng: &mut impl Rng, n: usize) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// `count` random pairs of distinct items, labeled by `oracle`.
///
/// With `balance = Some(f)` the similar pairs follow an exact quota: after `t`
/// pairs, `⌊t·f⌋` of them are similar. Pairs of the wrong label are redrawn.
pub fn pair_stream(
    oracle: &LabelOracle,
    count: usize,
    seed: RngSeed,
    balance: Option<f64>,
) -> Result<Vec<IndexedPair>> {
    let n = oracle.len();
    if count == 0 {
        return Ok(Vec::new());
    }
    if n < 2 {
        return Err(Error::invalid("pair stream needs at least two items"));
    }
    if let Some(f) = balance {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::invalid(format!("balance must lie in [0, 1], got {f}")));
        }
    }
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let want = balance.map(|f| {
            let due = ((t + 1) as f64 * f).floor() - (t as f64 * f).floor();
            if due >= 1.0 { Label::Similar } else { Label::Dissimilar }
        });
        let mut attempts = 0;
        loop {
            let (i, j) = draw(&mut rng, n);
            let label = oracle.label(i, j)?;
            if want.is_none_or(|w| w == label) {
                out.push(IndexedPair { i, j, label });
                break;
            }
            attempts += 1;
            if attempts >= MAX_ATTEMPTS_PER_PAIR {
                return Err(Error::invalid(format!(
                    "balance unreachable: no {want:?} pair found in {MAX_ATTEMPTS_PER_PAIR} draws"
                )));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::eval::LabelPolicy;

    fn classes(labels: Vec<u32>) -> LabelOracle {
        let n = labels.len();
        let d = Dataset::new(1, (0..n).map(|i| i as f64).collect(), Some(labels)).unwrap();
        LabelOracle::new(&d, LabelPolicy::Class).unwrap()
    }

    #[test]
    fn deterministic_and_distinct() {
        let o = classes((0..50).map(|i| i % 5).collect());
        let a = pair_stream(&o, 500, RngSeed(3), None).unwrap();
        let b = pair_stream(&o, 500, RngSeed(3), None).unwrap();
        let c = pair_stream(&o, 500, RngSeed(4), None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for p in &a {
            assert_ne!(p.i, p.j);
            assert_eq!(p.label, o.label(p.i, p.j).unwrap());
        }
    }

    #[test]
    fn balance_is_exact() {
        let o = classes((0..100).map(|i| i % 10).collect());
        let pairs = pair_stream(&o, 1000, RngSeed(9), Some(0.5)).unwrap();
        let similar = pairs.iter().filter(|p| p.label == Label::Similar).count();
        assert_eq!(similar, 500);
        let pairs = pair_stream(&o, 1000, RngSeed(9), Some(0.3)).unwrap();
        let similar = pairs.iter().filter(|p| p.label == Label::Similar).count();
        assert_eq!(similar, 300);
    }

    #[test]
    fn balance_over_ten_thousand_pairs() {
        let o = classes((0..1000).map(|i| i % 10).collect());
        let pairs = pair_stream(&o, 10_000, RngSeed(10), Some(0.5)).unwrap();
        let frac = pairs.iter().filter(|p| p.label == Label::Similar).count() as f64 / 1e4;
        assert!((0.49..=0.51).contains(&frac));
        // Unbalanced draws follow the class structure: about 1 in 10 similar.
        let pairs = pair_stream(&o, 10_000, RngSeed(10), None).unwrap();
        let frac = pairs.iter().filter(|p| p.label == Label::Similar).count() as f64 / 1e4;
        assert!((0.08..0.12).contains(&frac), "{frac}");
    }

    #[test]
    fn unreachable_balance_errors() {
        let o = classes((0..20).collect());
        assert!(pair_stream(&o, 10, RngSeed(1), Some(0.5)).is_err());
        assert!(pair_stream(&o, 10, RngSeed(1), Some(0.0)).is_ok());
        assert!(pair_stream(&o, 10, RngSeed(1), Some(1.5)).is_err());
        assert!(pair_stream(&classes(vec![0]), 1, RngSeed(1), None).is_err());
        assert!(pair_stream(&classes(vec![0]), 0, RngSeed(1), None).unwrap().is_empty());
    }
}
