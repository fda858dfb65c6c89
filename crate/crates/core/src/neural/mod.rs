//! Attention LSTM over (pitch, duration) token pairs, with a hand-written
//! backward pass.

mod matrix;
mod model;
mod params;
mod softmax;

use thiserror::Error;

pub use matrix::Matrix;
pub use model::{
    attention, backward, backward_scaled, embed, lstm_cell_forward, loss, model_forward, Attention,
    ForwardTrace, LstmState,
};
pub use params::{Gradients, Linear, ModelDims, ModelParams, TENSOR_NAMES};
pub use softmax::{argmax, log_sum_exp, temperature_softmax, TEMPERATURE_EPSILON};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    Shape { what: String, expected: usize, actual: usize },
    #[error("invalid model dimensions: {0}")]
    Dims(String),
    #[error("input window is empty")]
    EmptyWindow,
    #[error("{what} index {index} out of range for vocabulary of size {len}")]
    TokenOutOfRange { what: &'static str, index: usize, len: usize },
    #[error("training target contains PAD")]
    PadTarget,
    #[error("non-finite value {value} in tensor {tensor} at index {index}")]
    NonFinite { tensor: String, index: usize, value: f64 },
}
