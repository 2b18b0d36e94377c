//! Loss, Adam, the mini-batch training loop, evaluation metrics and
//! checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod metrics;
pub mod trainer;

pub use adam::{adam_step, clip_global_norm, AdamHyper, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use loss::{cross_entropy, cross_entropy_one_hot};
pub use metrics::{vote_per_trial, Metrics};
pub use trainer::{evaluate, fit, history_csv, predict_classes, train_epoch, EpochStats, FitOutcome, HistoryRow, TrainConfig};
