//! Faithfulness correlation, average sensitivity and effective complexity,
//! plus mean/std summaries. All arithmetic is carried out in `f64`.

mod complexity;
mod faithfulness;
mod sensitivity;
mod summary;

pub use complexity::{effective_complexity, ComplexityConfig};
pub use faithfulness::{faithfulness_correlation, faithfulness_pairs, pearson, remove_patches, FaithfulnessConfig};
pub use sensitivity::{avg_sensitivity, avg_sensitivity_of, SensitivityConfig, SENSITIVITY_EPS};
pub use summary::{render, summarize, summarize_by_class, SummaryStats};

use thiserror::Error;

use crate::explain::ExplainError;
use crate::vit::VitError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("invalid metric config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cannot summarize an empty set of values")]
    Empty,
    #[error(transparent)]
    Vit(#[from] VitError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
}
