//! Minimal layer engine for 1D keyword-spotting networks.
//!
//! Every layer exposes an explicit forward pass that returns a cache and a
//! backward pass that consumes it. There is no autodiff graph; models are
//! plain layer sequences.

mod adam;
mod gradcheck;
mod layers;
mod loss;
mod tensor;

use thiserror::Error;

use crate::error::ErrorClass;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_softmax_cross_entropy, relative_error};
pub use layers::{
    conv1d, conv1d_backward, dense, dense_backward, dropout, maxpool1d, maxpool1d_backward, relu, relu_backward, Cache,
    Conv1dGrads, DenseGrads, Layer, LayerGrads, LayerSpec, Mode,
};
pub use loss::{softmax, softmax_cross_entropy};
pub use tensor::{Scalar, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

impl NnError {
    pub fn class(&self) -> ErrorClass {
        match self {
            NnError::Shape(_) => ErrorClass::Data,
            NnError::Argument(_) => ErrorClass::Argument,
            NnError::NonFinite(_) => ErrorClass::Numeric,
        }
    }
}

pub type Result<T> = std::result::Result<T, NnError>;
