//! Learning core: LSTM/BLSTM layers, dense softmax head, cross-entropy,
//! backpropagation through time, SGD and the finite-difference oracle.

mod activation;
mod checkpoint;
mod gradcheck;
mod lstm;
mod model;

pub use activation::{cross_entropy, sigmoid, sigmoid_scalar, softmax, tanh_vec, PROB_FLOOR};
pub use checkpoint::{Checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, grad_check_with, relative_error, FdPrecision, GradCheckReport};
pub use lstm::{
    blstm_forward, lstm_cell_forward, lstm_sequence_backward, lstm_sequence_forward, merge_directions, BlstmPass,
    LstmParams, LstmState, Merge, StepCache,
};
pub use model::{
    dense_softmax_forward, loss, loss_and_gradients, model_backward, model_forward, predict_proba, sgd_step,
    Architecture, DenseParams, Direction, ForwardPass, Gradients, ModelConfig, ModelParams, Readout,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input sequence")]
    EmptySequence,
    #[error("label {0} is not a class index in [0, 8)")]
    InvalidLabel(usize),
    #[error("non-finite parameter value")]
    NonFinite,
    #[error("model configuration: {0}")]
    Config(String),
}
