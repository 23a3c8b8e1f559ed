//! A small pre-norm Vision Transformer with recorded attention, exact
//! backward passes and relevance propagation.

mod backward;
mod config;
mod forward;
mod io;
mod lrp;
mod patch;
mod weights;

pub use backward::{attention_gradients, backward, Gradients};
pub use config::ViTConfig;
pub use forward::{forward, forward_with_attention_hook, ForwardTrace, LayerTrace, PIXEL_MEAN, PIXEL_STD};
pub use io::{decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use lrp::{lrp_linear, lrp_relevances, Relevances, DEFAULT_LRP_EPS};
pub use patch::{patchify, unpatchify};
pub use weights::{parameter_layout, BlockWeights, ViTWeights, INIT_STD};

pub(crate) use forward::argmax;

use thiserror::Error;

use crate::{Scalar, Tensor, TensorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VitError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("image shape {got:?}, expected {expected}")]
    ImageShape { expected: String, got: Vec<usize> },
    #[error("target class {target} out of range for {n_classes} classes")]
    TargetOutOfRange { target: usize, n_classes: usize },
    #[error("LRP epsilon must be positive, got {0}")]
    InvalidEps(f64),
    #[error("weights do not match config: {0}")]
    ConfigMismatch(String),
    #[error("parameter {0} contains non-finite values")]
    NonFinite(String),
    #[error("malformed weight file: {0}")]
    Malformed(String),
    #[error("unsupported weight file version: {0}")]
    UnsupportedVersion(String),
    #[error("weight file truncated in tensor record `{tensor}`: needs {needed} payload bytes, {available} present")]
    Truncated {
        tensor: String,
        needed: usize,
        available: usize,
    },
    #[error("i/o: {0}")]
    Io(String),
}

/// Anything that maps an image to class logits.
pub trait Model<T: Scalar>: Sync {
    fn n_classes(&self) -> usize;

    fn logits(&self, image: &Tensor<T>) -> Result<Vec<T>, VitError>;

    fn predict(&self, image: &Tensor<T>) -> Result<usize, VitError> {
        Ok(argmax(&self.logits(image)?))
    }
}

/// Configuration and weights bundled as a [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Vit<T> {
    pub config: ViTConfig,
    pub weights: ViTWeights<T>,
}

impl<T: Scalar> Vit<T> {
    pub fn new(config: ViTConfig, weights: ViTWeights<T>) -> Result<Self, VitError> {
        weights.validate(&config)?;
        Ok(Self { config, weights })
    }

    pub fn init(config: ViTConfig, seed: u64) -> Result<Self, VitError> {
        Ok(Self {
            weights: ViTWeights::init(&config, seed)?,
            config,
        })
    }

    pub fn forward(&self, image: &Tensor<T>) -> Result<ForwardTrace<T>, VitError> {
        forward(&self.weights, &self.config, image)
    }

    pub fn attention_gradients(&self, trace: &ForwardTrace<T>, target: usize) -> Result<Vec<Tensor<T>>, VitError> {
        attention_gradients(&self.weights, &self.config, trace, target)
    }

    pub fn lrp_relevances(&self, trace: &ForwardTrace<T>, target: usize, eps: T) -> Result<Relevances<T>, VitError> {
        lrp_relevances(&self.weights, &self.config, trace, target, eps)
    }
}

impl<T: Scalar> Model<T> for Vit<T> {
    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn logits(&self, image: &Tensor<T>) -> Result<Vec<T>, VitError> {
        Ok(self.forward(image)?.logits.into_data())
    }
}
