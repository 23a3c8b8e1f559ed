use rand::Rng as _;

use super::MetricsError;
use crate::explain::Explainer;
use crate::rng;
use crate::vit::Vit;
use crate::{Scalar, Tensor};

/// Floor of the reference-norm divisor.
pub const SENSITIVITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityConfig {
    /// Half-width of the uniform per-pixel noise.
    pub radius: f64,
    pub n_samples: usize,
    /// Divide by `‖e₀‖_F`.
    pub normalize: bool,
    pub seed: u64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            radius: 0.1,
            n_samples: 10,
            normalize: true,
            seed: 0,
        }
    }
}

fn frobenius<T: Scalar>(t: &Tensor<T>) -> f64 {
    t.data().iter().map(|v| v.to_f64_lossy().powi(2)).sum::<f64>().sqrt()
}

/// Mean Frobenius distance between `explain(x')` and `explain(x)` over
/// uniformly perturbed, clipped inputs `x'`, relative to `‖explain(x)‖`.
/// `explain` must be deterministic.
pub fn avg_sensitivity<T, F, E>(image: &Tensor<T>, explain: F, cfg: &SensitivityConfig) -> Result<f64, MetricsError>
where
    T: Scalar,
    F: Fn(&Tensor<T>) -> Result<Tensor<T>, E>,
    MetricsError: From<E>,
{
    if cfg.radius.is_nan() || cfg.radius <= 0.0 || cfg.n_samples == 0 {
        return Err(MetricsError::InvalidConfig("radius must be positive and n_samples at least 1".into()));
    }
    let e0 = explain(image)?;
    let denom = if cfg.normalize {
        frobenius(&e0).max(SENSITIVITY_EPS)
    } else {
        1.0
    };
    let mut rng = rng::stream(cfg.seed, &[rng::tag("sensitivity")]);
    let mut total = 0.0;
    for _ in 0..cfg.n_samples {
        let noisy = Tensor::from_fn(image.shape(), |i| {
            let u = rng.random_range(-cfg.radius..=cfg.radius);
            T::c((image.data()[i].to_f64_lossy() + u).clamp(0.0, 1.0))
        });
        let e = explain(&noisy)?;
        if e.shape() != e0.shape() {
            return Err(MetricsError::Shape(format!("explanation {:?} vs {:?}", e.shape(), e0.shape())));
        }
        let diff: f64 = e
            .data()
            .iter()
            .zip(e0.data())
            .map(|(a, b)| (a.to_f64_lossy() - b.to_f64_lossy()).powi(2))
            .sum();
        total += diff.sqrt() / denom;
    }
    Ok(total / cfg.n_samples as f64)
}

/// [`avg_sensitivity`] of `explainer` with its target and internal seed held fixed.
pub fn avg_sensitivity_of<T: Scalar>(
    model: &Vit<T>,
    explainer: &dyn Explainer<T>,
    image: &Tensor<T>,
    target: usize,
    explainer_seed: u64,
    cfg: &SensitivityConfig,
) -> Result<f64, MetricsError> {
    avg_sensitivity(
        image,
        |x| explainer.explain(model, x, target, explainer_seed).map(|a| a.values),
        cfg,
    )
}
