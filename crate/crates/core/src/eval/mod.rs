//! Evaluation harness: pair labeling and streams, Hamming retrieval, mAP, and
//! runtime monitoring of the cumulative-loss bounds.

mod labels;
mod monitor;
mod retrieval;
mod stream;
pub mod synthetic;

pub use labels::{neighbor_count, pair_label, GroundTruth, LabelOracle, LabelPolicy, DEFAULT_PERCENTILE};
pub use monitor::{BoundMonitor, EnsembleBoundMonitor};
pub use retrieval::{
    average_precision, linear_scan, linear_scan_multi, mean_average_precision, MapReport, Neighbor,
};
pub use stream::{pair_stream, IndexedPair, MAX_ATTEMPTS_PER_PAIR};
