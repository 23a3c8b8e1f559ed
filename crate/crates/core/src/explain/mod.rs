//! Explanation methods: attention rollout with head aggregation variants,
//! TransLRP and LIME. Every method emits an [`Attribution`] in `[0, 1]`.

mod aggregate;
mod attribution;
mod lime;
mod rollout;

pub use aggregate::{aggregate_heads, kept_count, HeadAggregation, DEFAULT_DISCARD};
pub use attribution::{downsample_block_mean, normalize_map, upsample_patch_map, Attribution, AttributionInfo};
pub use lime::{grid_segments, lime_explain, lime_fit, LimeConfig, LimeFit};
pub use rollout::{attention_rollout, cls_patch_scores, image_side, rollout_matrix, translrp, translrp_matrix};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::vit::{Vit, VitError, DEFAULT_LRP_EPS};
use crate::{Scalar, Tensor, TensorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error("target class {target} out of range for {n_classes} classes")]
    TargetOutOfRange { target: usize, n_classes: usize },
    #[error(
        "LIME design stayed degenerate after {attempts} attempts ({n_samples} samples, {n_segments} segments): \
         some segment was on or off in every sample"
    )]
    DegenerateDesign {
        attempts: usize,
        n_samples: usize,
        n_segments: usize,
    },
    #[error(transparent)]
    Vit(#[from] VitError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Which method produced an attribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExplainerKind {
    Attention(HeadAggregation),
    TransLrp,
    Lime,
}

impl ExplainerKind {
    /// Stable identifier, e.g. `attention-max`, `translrp`, `lime`.
    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn is_class_specific(&self) -> bool {
        !matches!(self, ExplainerKind::Attention(_))
    }
}

impl fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExplainerKind::Attention(a) => write!(f, "attention-{a}"),
            ExplainerKind::TransLrp => f.write_str("translrp"),
            ExplainerKind::Lime => f.write_str("lime"),
        }
    }
}

impl FromStr for ExplainerKind {
    type Err = String;

    /// `attention` alone means the default MaxDiscard aggregation.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "translrp" => Ok(ExplainerKind::TransLrp),
            "lime" => Ok(ExplainerKind::Lime),
            "attention" => Ok(ExplainerKind::Attention(HeadAggregation::default())),
            other => match other.strip_prefix("attention-") {
                Some(agg) => Ok(ExplainerKind::Attention(agg.parse()?)),
                None => Err(format!("unknown explainer `{other}`")),
            },
        }
    }
}

/// An explanation method bound to its settings.
pub trait Explainer<T: Scalar>: Send + Sync {
    fn kind(&self) -> ExplainerKind;

    /// Explains `model`'s logit for `target` at `image`. Class-agnostic
    /// methods ignore `target`; deterministic methods ignore `seed`.
    fn explain(&self, model: &Vit<T>, image: &Tensor<T>, target: usize, seed: u64) -> Result<Attribution<T>, ExplainError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionRollout {
    pub aggregation: HeadAggregation,
}

impl<T: Scalar> Explainer<T> for AttentionRollout {
    fn kind(&self) -> ExplainerKind {
        ExplainerKind::Attention(self.aggregation)
    }

    fn explain(&self, model: &Vit<T>, image: &Tensor<T>, _target: usize, _seed: u64) -> Result<Attribution<T>, ExplainError> {
        attention_rollout(&model.forward(image)?, self.aggregation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransLrp {
    /// Stabilizer of the ε-rule.
    pub eps: f64,
}

impl Default for TransLrp {
    fn default() -> Self {
        Self { eps: DEFAULT_LRP_EPS }
    }
}

impl<T: Scalar> Explainer<T> for TransLrp {
    fn kind(&self) -> ExplainerKind {
        ExplainerKind::TransLrp
    }

    fn explain(&self, model: &Vit<T>, image: &Tensor<T>, target: usize, _seed: u64) -> Result<Attribution<T>, ExplainError> {
        let trace = model.forward(image)?;
        let grads = model.attention_gradients(&trace, target)?;
        let rel = model.lrp_relevances(&trace, target, T::c(self.eps))?;
        translrp(&trace, &grads, &rel.attention, target)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lime {
    pub config: LimeConfig,
}

impl<T: Scalar> Explainer<T> for Lime {
    fn kind(&self) -> ExplainerKind {
        ExplainerKind::Lime
    }

    fn explain(&self, model: &Vit<T>, image: &Tensor<T>, target: usize, seed: u64) -> Result<Attribution<T>, ExplainError> {
        lime_explain(model, image, target, &self.config, seed)
    }
}

/// Builds the explainer for `kind`; `lime` configures LIME only.
pub fn explainer_for<T: Scalar>(kind: ExplainerKind, lime: &LimeConfig) -> Box<dyn Explainer<T>> {
    match kind {
        ExplainerKind::Attention(aggregation) => Box::new(AttentionRollout { aggregation }),
        ExplainerKind::TransLrp => Box::new(TransLrp::default()),
        ExplainerKind::Lime => Box::new(Lime { config: lime.clone() }),
    }
}
