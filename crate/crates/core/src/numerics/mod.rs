//! Dense f32 tensors with reverse-mode gradients.
//!
//! A [`Tape`] records ops in execution order; [`Tape::backward`] replays them
//! in reverse. Model weights live in a [`ParamStore`] and are bound onto a
//! fresh tape for every forward pass.

mod gradcheck;
pub mod kernels;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_sampled, GradCheckReport};
pub use params::{Bound, ParamId, ParamStore};
pub use tape::{Axis, Tape, Var, NORM_EPS};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("ZeroRow: row {row} has norm at or below 1e-12")]
    ZeroRow { row: usize },
    #[error("NotScalar: backward needs a single-element loss, got {len} elements")]
    NotScalar { len: usize },
    #[error("NonFinite: function returned NaN or Inf at a probe point")]
    NonFinite,
    #[error("UnknownCheck: no gradient check named {0:?}")]
    UnknownCheck(String),
}

#[cfg(test)]
mod tests;
