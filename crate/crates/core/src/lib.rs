pub mod cli;
pub mod data;
pub mod eval;
pub mod experiments;
pub mod gradsuite;
pub mod losses;
pub mod model;
pub mod numerics;
pub mod text;
pub mod train;

pub use numerics::{NumericsError, Tensor};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Downstream recognition task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Facial expression recognition: one class per sample.
    #[default]
    Fer,
    /// Action unit recognition: multi-label.
    Aur,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Text(#[from] text::TextError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Loss(#[from] losses::LossError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Train(#[from] train::TrainError),
}
