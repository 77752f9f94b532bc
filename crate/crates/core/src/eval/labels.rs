use rayon::prelude::*;

use crate::dataset::{squared_distance, Dataset};
use crate::error::{Error, Result};
use crate::loss::Label;

pub const DEFAULT_PERCENTILE: f64 = 0.05;

/// How pairs are labeled similar or dissimilar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LabelPolicy {
    /// Similar iff both items carry the same class label.
    Class,
    /// Similar iff either item is among the other's `percentile` nearest neighbors
    /// (Euclidean), e.g. 0.05 for the top 5%.
    Metric { percentile: f64 },
}

impl LabelPolicy {
    pub fn metric() -> Self {
        LabelPolicy::Metric { percentile: DEFAULT_PERCENTILE }
    }

    fn validate(&self) -> Result<()> {
        if let LabelPolicy::Metric { percentile } = self {
            if !(*percentile > 0.0 && *percentile <= 1.0) {
                return Err(Error::invalid(format!("percentile must lie in (0, 1], got {percentile}")));
            }
        }
        Ok(())
    }
}

/// Neighbor-list length for `candidates` items: `⌈p · candidates⌉`, at least 1.
pub fn neighbor_count(candidates: usize, percentile: f64) -> usize {
    ((percentile * candidates as f64 - 1e-9).ceil() as usize).clamp(1, candidates.max(1))
}

/// Ranks are by (distance, index) so ties resolve deterministically.
fn rank_of(data: &Dataset, i: usize, j: usize) -> usize {
    let anchor = data.row(i);
    let key = (squared_distance(anchor, data.row(j)), j);
    1 + (0..data.len())
        .filter(|&l| l != i && l != j)
        .filter(|&l| {
            let d = squared_distance(anchor, data.row(l));
            d < key.0 || (d == key.0 && l < key.1)
        })
        .count()
}

fn check_pair(data: &Dataset, i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::invalid(format!("pair ({i}, {j}) must use distinct items")));
    }
    let n = data.len();
    if i >= n || j >= n {
        return Err(Error::invalid(format!("pair ({i}, {j}) out of range for {n} items")));
    }
    Ok(())
}

/// Label one pair directly. For repeated queries build a [`LabelOracle`].
pub fn pair_label(data: &Dataset, i: usize, j: usize, policy: LabelPolicy) -> Result<Label> {
    policy.validate()?;
    check_pair(data, i, j)?;
    match policy {
        LabelPolicy::Class => {
            let labels = data
                .labels()
                .ok_or_else(|| Error::invalid("class policy needs a labeled dataset"))?;
            Ok(if labels[i] == labels[j] { Label::Similar } else { Label::Dissimilar })
        }
        LabelPolicy::Metric { percentile } => {
            let k = neighbor_count(data.len() - 1, percentile);
            let similar = rank_of(data, i, j) <= k || rank_of(data, j, i) <= k;
            Ok(if similar { Label::Similar } else { Label::Dissimilar })
        }
    }
}

#[derive(Clone, Debug)]
enum OracleKind {
    Class(Vec<u32>),
    /// Sorted neighbor indices per item.
    Metric(Vec<Vec<usize>>),
}

/// Precomputed pair labels for one dataset.
#[derive(Clone, Debug)]
pub struct LabelOracle {
    len: usize,
    kind: OracleKind,
}

impl LabelOracle {
    pub fn new(data: &Dataset, policy: LabelPolicy) -> Result<Self> {
        policy.validate()?;
        let kind = match policy {
            LabelPolicy::Class => OracleKind::Class(
                data.labels()
                    .ok_or_else(|| Error::invalid("class policy needs a labeled dataset"))?
                    .to_vec(),
            ),
            LabelPolicy::Metric { percentile } => {
                let n = data.len();
                let k = neighbor_count(n.saturating_sub(1), percentile);
                let lists = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let anchor = data.row(i);
                        let mut others: Vec<(f64, usize)> = (0..n)
                            .filter(|&l| l != i)
                            .map(|l| (squared_distance(anchor, data.row(l)), l))
                            .collect();
                        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                        if k < others.len() {
                            others.select_nth_unstable_by(k - 1, cmp);
                            others.truncate(k);
                        }
                        let mut ids: Vec<usize> = others.into_iter().map(|(_, l)| l).collect();
                        ids.sort_unstable();
                        ids
                    })
                    .collect();
                OracleKind::Metric(lists)
            }
        };
        Ok(LabelOracle { len: data.len(), kind })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn label(&self, i: usize, j: usize) -> Result<Label> {
        if i == j || i >= self.len || j >= self.len {
            return Err(Error::invalid(format!("invalid pair ({i}, {j}) for {} items", self.len)));
        }
        let similar = match &self.kind {
            OracleKind::Class(labels) => labels[i] == labels[j],
            OracleKind::Metric(lists) => {
                lists[i].binary_search(&j).is_ok() || lists[j].binary_search(&i).is_ok()
            }
        };
        Ok(if similar { Label::Similar } else { Label::Dissimilar })
    }
}

/// Relevant database items for each query.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    relevant: Vec<Vec<usize>>,
}

impl GroundTruth {
    /// Relevant sets given explicitly; indices are sorted and deduplicated.
    pub fn new(mut relevant: Vec<Vec<usize>>, database_len: usize) -> Result<Self> {
        for set in &mut relevant {
            set.sort_unstable();
            set.dedup();
            if set.last().is_some_and(|&i| i >= database_len) {
                return Err(Error::invalid("relevant index out of database range"));
            }
        }
        Ok(GroundTruth { relevant })
    }

    /// Database items sharing the query's class.
    pub fn from_classes(queries: &Dataset, database: &Dataset) -> Result<Self> {
        let (ql, dl) = match (queries.labels(), database.labels()) {
            (Some(q), Some(d)) => (q, d),
            _ => return Err(Error::invalid("class policy needs labels on queries and database")),
        };
        let relevant = ql
            .iter()
            .map(|c| dl.iter().enumerate().filter(|(_, d)| *d == c).map(|(i, _)| i).collect())
            .collect();
        Ok(GroundTruth { relevant })
    }

    /// The `⌈p · n⌉` Euclidean nearest database items of each query.
    pub fn from_metric(queries: &Dataset, database: &Dataset, percentile: f64) -> Result<Self> {
        LabelPolicy::Metric { percentile }.validate()?;
        if queries.dim() != database.dim() {
            return Err(Error::DimensionMismatch { expected: database.dim(), found: queries.dim() });
        }
        let k = neighbor_count(database.len(), percentile);
        let relevant = (0..queries.len())
            .into_par_iter()
            .map(|q| {
                let x = queries.row(q);
                let mut d: Vec<(f64, usize)> = database
                    .rows()
                    .enumerate()
                    .map(|(i, r)| (squared_distance(x, r), i))
                    .collect();
                d.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut ids: Vec<usize> = d.into_iter().take(k).map(|(_, i)| i).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        Ok(GroundTruth { relevant })
    }

    pub fn from_policy(queries: &Dataset, database: &Dataset, policy: LabelPolicy) -> Result<Self> {
        match policy {
            LabelPolicy::Class => Self::from_classes(queries, database),
            LabelPolicy::Metric { percentile } => Self::from_metric(queries, database, percentile),
        }
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    /// Sorted relevant indices of query `q`.
    pub fn relevant(&self, q: usize) -> &[usize] {
        &self.relevant[q]
    }
}
