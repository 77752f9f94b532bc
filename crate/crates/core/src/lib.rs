//! Online hashing with a structured-prediction hinge loss and passive-aggressive
//! updates, plus a multi-model variant, evaluation tools and file formats.
//!
//! Vectors are encoded as `sgn(Wᵀx)` after optional kernel mapping and mean
//! centering. Each labeled pair updates `W` in closed form towards the nearest
//! code pair with zero similarity loss.

pub mod code;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod format;
pub mod inference;
pub mod kernel;
pub mod loss;
pub mod model;
pub mod snapshot;
pub mod trainer;
pub mod workflow;

pub use code::{CodePair, HashCode};
pub use dataset::Dataset;
pub use ensemble::{mm_distance, Ensemble, EnsembleReport, Selection};
pub use error::{Error, Result};
pub use inference::{infer_zero_loss_codes, FlipPlan, Side};
pub use kernel::KernelMapper;
pub use loss::{prediction_loss, similarity_loss, Label, LossParams, PairSample};
pub use model::{HashModel, RngSeed};
pub use snapshot::ModelSnapshot;
pub use trainer::{OnlineHasher, Trainer, TrainerConfig, UpdateReport};
