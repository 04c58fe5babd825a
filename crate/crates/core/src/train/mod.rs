//! Optimizer, learning-rate schedule, the pre-training and fine-tuning loops,
//! and checkpoint files.

mod checkpoint;
mod config;
mod loops;
mod optim;
mod schedule;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
pub use config::{FinetuneMode, RunConfig, Stage};
pub use loops::{finetune, pretrain, LossLog, LossRecord, Prompts, TrainOutcome};
pub use optim::{adamw_step, AdamW, OptimState};
pub use schedule::Schedule;

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("StepOutOfRange: step {step} outside 0..={total}")]
    StepOutOfRange { step: u64, total: u64 },
    #[error("ArchMismatch: {0}")]
    ArchMismatch(String),
    #[error("FormatError: at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("VersionError: unsupported checkpoint version {0}")]
    Version(u8),
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}
