use super::MetricsError;
use crate::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityConfig {
    /// Exclusive bound in `(0, 1)`.
    pub threshold: f64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        Self { threshold: 0.1 }
    }
}

/// Fraction of pixels whose attribution exceeds the threshold.
pub fn effective_complexity<T: Scalar>(attribution: &Tensor<T>, cfg: &ComplexityConfig) -> Result<f64, MetricsError> {
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(MetricsError::InvalidConfig(format!("threshold {} outside (0, 1)", cfg.threshold)));
    }
    let above = attribution
        .data()
        .iter()
        .filter(|v| v.to_f64_lossy() > cfg.threshold)
        .count();
    Ok(above as f64 / attribution.len() as f64)
}
