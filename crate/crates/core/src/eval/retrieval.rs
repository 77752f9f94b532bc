use crate::code::HashCode;
use crate::ensemble::mm_distance;
use crate::error::{check_dim, Error, Result};
use crate::eval::GroundTruth;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: u32,
}

/// Counting sort of database indices by distance; ties keep index order.
fn rank(distances: &[u32], max: u32) -> Vec<Neighbor> {
    let mut counts = vec![0usize; max as usize + 2];
    for &d in distances {
        counts[d as usize + 1] += 1;
    }
    for k in 1..counts.len() {
        counts[k] += counts[k - 1];
    }
    let mut out = vec![Neighbor { index: 0, distance: 0 }; distances.len()];
    for (index, &distance) in distances.iter().enumerate() {
        let slot = &mut counts[distance as usize];
        out[*slot] = Neighbor { index, distance };
        *slot += 1;
    }
    out
}

/// Rank every database code by Hamming distance to `query`.
pub fn linear_scan(query: &HashCode, database: &[HashCode]) -> Result<Vec<Neighbor>> {
    let mut distances = Vec::with_capacity(database.len());
    for code in database {
        distances.push(query.hamming(code)?);
    }
    Ok(rank(&distances, query.len() as u32))
}

/// Rank database items by the minimum Hamming distance over models.
/// `database[item][model]`, `query[model]`.
pub fn linear_scan_multi(query: &[HashCode], database: &[Vec<HashCode>]) -> Result<Vec<Neighbor>> {
    let bits = query.first().map_or(0, HashCode::len);
    let mut distances = Vec::with_capacity(database.len());
    for item in database {
        distances.push(mm_distance(item, query)?);
    }
    Ok(rank(&distances, bits as u32))
}

/// Mean over relevant items of the precision at each one's rank. Relevant items
/// missing from `ranking` count as never retrieved. `None` when `relevant` is empty.
pub fn average_precision(ranking: &[usize], relevant: &[usize]) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, idx) in ranking.iter().enumerate() {
        if relevant.binary_search(idx).is_ok() {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
            if hits == relevant.len() {
                break;
            }
        }
    }
    Some(sum / relevant.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapReport {
    pub map: f64,
    /// AP per query; `None` for queries without relevant items.
    pub per_query: Vec<Option<f64>>,
    pub evaluated: usize,
}

/// mAP over full rankings. Queries with no relevant item are excluded (and logged).
pub fn mean_average_precision(rankings: &[Vec<usize>], truth: &GroundTruth) -> Result<MapReport> {
    check_dim(truth.len(), rankings.len())?;
    let per_query: Vec<Option<f64>> = rankings
        .iter()
        .enumerate()
        .map(|(q, r)| average_precision(r, truth.relevant(q)))
        .collect();
    let excluded = per_query.iter().filter(|a| a.is_none()).count();
    if excluded > 0 {
        log::warn!("{excluded} queries have no relevant items and are excluded from mAP");
    }
    let evaluated = per_query.len() - excluded;
    if evaluated == 0 {
        return Err(Error::invalid("no query has a relevant item"));
    }
    let map = per_query.iter().flatten().sum::<f64>() / evaluated as f64;
    Ok(MapReport { map, per_query, evaluated })
}
