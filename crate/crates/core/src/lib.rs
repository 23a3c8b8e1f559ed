//! Explanations for a small Vision Transformer and the metrics that score them.
//!
//! The crate is generic over the floating point [`Scalar`]; the aliases at the
//! root pick the two precisions used in practice. `f32` drives training and the
//! benchmark, `f64` drives gradient checks and metric oracles.

pub mod data;
pub mod explain;
pub mod metrics;
pub mod rng;
mod scalar;
pub mod tensor;
pub mod train;
pub mod vit;

pub use scalar::{sign_nonneg, Scalar};
pub use tensor::{Tensor, TensorError};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;

pub type Vit32 = vit::Vit<f32>;
pub type Vit64 = vit::Vit<f64>;
pub type Weights32 = vit::ViTWeights<f32>;
pub type Weights64 = vit::ViTWeights<f64>;
pub type Attribution32 = explain::Attribution<f32>;
pub type Attribution64 = explain::Attribution<f64>;
