//! A relative transformer over per-frame tokens: early fusion, rotary
//! band-masked attention, multi-task heads, training losses and
//! hand-written gradients.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod fusion;
pub mod heads;
pub mod loss;
pub mod model;
pub mod nn;
pub mod optim;
pub mod rope;
pub mod tensor;
pub mod toy;
pub mod transformer;

use thiserror::Error;

pub use config::{Activation, LossWeights, ModelConfig};
pub use model::{Model, ModelParams};
pub use tensor::Matrix;

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("{what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("rotary embedding needs an even dimension, got {0}")]
    OddDimension(usize),
    #[error("weak camera restore needs positive scale, box size and focal length (s={s}, b={box_size}, f={focal})")]
    NonPositiveScale { s: f64, box_size: f64, focal: f64 },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("loss term `{0}` has nonzero weight but no target")]
    MissingTarget(&'static str),
    #[error("kinematics: {0}")]
    Kinematics(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Matrixd = Matrix<f64>;
pub type Matrixf = Matrix<f32>;
pub type Modeld = Model<f64>;
pub type Modelf = Model<f32>;
