//! Dense tensor primitives for the model: parameters and gradients, the
//! LSTM cell, softmax/cross-entropy, dropout, clipping, SGD, the learning
//! rate schedule, a finite-difference checker and the checkpoint format.

mod checkpoint;
mod dropout;
mod gradcheck;
mod lstm;
mod ops;
mod real;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use dropout::{make_dropout_mask, DropoutMask, StepDropout};
pub use gradcheck::{grad_check, GradCheckReport, DEFAULT_EPS};
pub use lstm::{lstm_cell_backward, lstm_cell_forward, CellVariant, LstmCache, LstmState, LstmWeights};
pub use ops::{
    clip_gradients, cross_entropy, decay_schedule, derive_seed, init_uniform, log_softmax, sgd_step, softmax,
    softmax_in_place, PROB_FLOOR,
};
pub use real::{gemm, Real};
pub use tensor::{Grads, ParamId, ParamStore, ParameterTensor};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericsError {
    #[error("{what}: expected shape {expected:?}, found {found:?}")]
    DimensionMismatch { what: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("non-finite gradient in {parameter}[{index}]")]
    NonFiniteGradient { parameter: String, index: usize },
    #[error("non-finite value in {parameter}[{index}] after update")]
    NonFiniteParameter { parameter: String, index: usize },
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("parameter {0} is missing")]
    MissingParameter(String),
}
