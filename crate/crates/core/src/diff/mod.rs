//! Reverse-mode automatic differentiation over scalars, parameter storage,
//! optimizers and finite-difference gradient checking.

mod gradcheck;
mod optim;
mod params;
mod tape;

pub use gradcheck::{gradcheck, GradCheckConfig, GradCheckFailure, GradCheckReport};
pub use optim::{Optimizer, OptimizerConfig};
pub use params::{ParamGrads, ParamStore, Tensor, TensorId, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use tape::{Gradients, NodeId, Scalar, Tape};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffError {
    #[error("non-finite value produced at tape node {node}")]
    NonFiniteValue { node: usize },
    #[error("non-finite gradient at tape node {node}")]
    NonFiniteGradient { node: usize },
    #[error("shape mismatch for `{name}`: expected {expected} values, got {got}")]
    ShapeMismatch { name: String, expected: usize, got: usize },
    #[error("tensor `{0}` is already registered")]
    DuplicateTensor(String),
    #[error("unknown tensor `{0}`")]
    UnknownTensor(String),
    #[error("non-finite parameter in `{name}` at index {index}")]
    NonFiniteParameter { name: String, index: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
