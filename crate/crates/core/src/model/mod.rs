//! Attention encoder–decoder: a stacked (B)LSTM encoder over source tokens
//! and an LSTM decoder with Luong or Bahdanau attention, plus the
//! teacher-forced training loop.

mod attention;
mod config;
mod network;
mod recurrent;
mod train;

pub use config::{AttentionType, ConfigError, EncoderType, ModelConfig};
pub use network::{AttentionOutput, DecoderState, EncoderOutput, Seq2Seq, StepOutput};
pub use train::{greedy_accuracy, load_model, save_model, train, CheckpointHeader, EpochRecord, TrainOptions, TrainingLog, CHECKPOINT_FILE};

use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("token id {id} is outside the vocabulary of {vocab_size}")]
    UnknownTokenId { id: u32, vocab_size: usize },
    #[error("sequence of {len} tokens exceeds the limit of {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("vocabulary hash {found} does not match the checkpoint's {expected}")]
    VocabularyMismatch { expected: String, found: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
