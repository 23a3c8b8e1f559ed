//! LIME with a patch-aligned grid segmentation.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;

use super::{Attribution, ExplainError, ExplainerKind};
use crate::rng;
use crate::vit::Model;
use crate::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LimeConfig {
    /// Must be a perfect square whose root divides the image side.
    pub n_segments: usize,
    pub n_samples: usize,
    pub top_k: usize,
    pub kernel_width: f64,
    pub ridge_alpha: f64,
    /// Pixel value of switched-off segments.
    pub baseline: f64,
    pub max_attempts: usize,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_segments: 16,
            n_samples: 500,
            top_k: 2,
            kernel_width: 0.25,
            ridge_alpha: 1.0,
            baseline: 0.0,
            max_attempts: 3,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self, image_side: usize) -> Result<usize, ExplainError> {
        let bad = |m: String| Err(ExplainError::InvalidArgument(m));
        let g = (self.n_segments as f64).sqrt().round() as usize;
        if g == 0 || g * g != self.n_segments || !image_side.is_multiple_of(g) {
            return bad(format!(
                "{} segments do not tile a {image_side}x{image_side} image as a square grid",
                self.n_segments
            ));
        }
        if self.top_k == 0 || self.top_k > self.n_segments {
            return bad(format!("top_k {} must be in 1..={}", self.top_k, self.n_segments));
        }
        if self.n_samples < 10 {
            return bad(format!("n_samples {} must be at least 10", self.n_samples));
        }
        if !(self.kernel_width > 0.0 && self.ridge_alpha >= 0.0) {
            return bad("kernel width must be positive and ridge alpha non-negative".into());
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive".into());
        }
        Ok(g)
    }
}

/// The fitted local surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct LimeFit {
    /// One coefficient per segment, row-major over the segment grid.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// 1 when the first design was usable.
    pub attempts: usize,
}

impl LimeFit {
    /// Indices of the `k` largest positive coefficients, ties to the lower index.
    pub fn top_positive(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.coefficients.len()).filter(|&i| self.coefficients[i] > 0.0).collect();
        idx.sort_by(|&a, &b| self.coefficients[b].total_cmp(&self.coefficients[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

/// Segment index of every pixel for a `g x g` grid over a `side x side` image.
pub fn grid_segments(side: usize, g: usize) -> Vec<usize> {
    let block = side / g;
    (0..side * side).map(|i| (i / side / block) * g + (i % side) / block).collect()
}

/// `sqrt(exp(-d^2 / w^2))` on the cosine distance between `mask` and the all-on mask.
fn kernel_weight(mask: &[bool], width: f64) -> f64 {
    let on = mask.iter().filter(|&&b| b).count() as f64;
    let d = if on == 0.0 {
        1.0
    } else {
        1.0 - on / (on.sqrt() * (mask.len() as f64).sqrt())
    };
    (-(d * d) / (width * width)).exp().sqrt()
}

fn sample_masks(n_samples: usize, n_segments: usize, rng: &mut rng::Rng) -> Vec<Vec<bool>> {
    let mut masks = vec![vec![true; n_segments]];
    for _ in 1..n_samples {
        masks.push((0..n_segments).map(|_| rng.random_bool(0.5)).collect());
    }
    masks
}

fn degenerate(masks: &[Vec<bool>]) -> bool {
    (0..masks[0].len()).any(|s| masks.iter().all(|m| m[s] == masks[0][s]))
}

/// Weighted ridge with an unpenalized intercept: centers by weighted means,
/// then solves `(Xcᵀ W Xc + αI) β = Xcᵀ W yc`.
fn weighted_ridge(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, alpha: f64) -> Option<(DVector<f64>, f64)> {
    let total = w.sum();
    let x_mean = x.transpose() * w / total;
    let y_mean = y.dot(w) / total;
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= x_mean.transpose();
    }
    let yc = y.add_scalar(-y_mean);
    let mut xw = xc.clone();
    for (mut row, &wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    let mut gram = xc.transpose() * &xw;
    for i in 0..gram.nrows() {
        gram[(i, i)] += alpha;
    }
    let rhs = xw.transpose() * yc;
    let beta = gram.cholesky()?.solve(&rhs);
    let intercept = y_mean - beta.dot(&x_mean);
    Some((beta, intercept))
}

/// Fits the local linear surrogate of `model`'s `target` logit around `image`.
pub fn lime_fit<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    image: &Tensor<T>,
    target: usize,
    config: &LimeConfig,
    seed: u64,
) -> Result<LimeFit, ExplainError> {
    let (h, w) = image.dims2();
    if h != w {
        return Err(ExplainError::InvalidArgument(format!("image must be square, got {h}x{w}")));
    }
    if target >= model.n_classes() {
        return Err(ExplainError::TargetOutOfRange {
            target,
            n_classes: model.n_classes(),
        });
    }
    let g = config.validate(h)?;
    let segments = grid_segments(h, g);
    let baseline = T::c(config.baseline);

    for attempt in 0..config.max_attempts {
        let mut rng = rng::stream(seed, &[rng::tag("lime"), attempt as u64]);
        let masks = sample_masks(config.n_samples, config.n_segments, &mut rng);
        if degenerate(&masks) {
            continue;
        }
        let targets = masks
            .par_iter()
            .map(|mask| {
                let data = image
                    .data()
                    .iter()
                    .zip(&segments)
                    .map(|(&v, &s)| if mask[s] { v } else { baseline })
                    .collect();
                let logits = model.logits(&Tensor::new(&[h, w], data)?)?;
                Ok(logits[target].to_f64_lossy())
            })
            .collect::<Result<Vec<f64>, ExplainError>>()?;
        let x = DMatrix::from_fn(masks.len(), config.n_segments, |r, c| f64::from(u8::from(masks[r][c])));
        let y = DVector::from_vec(targets);
        let wts = DVector::from_iterator(masks.len(), masks.iter().map(|m| kernel_weight(m, config.kernel_width)));
        let Some((beta, intercept)) = weighted_ridge(&x, &y, &wts, config.ridge_alpha) else {
            continue;
        };
        return Ok(LimeFit {
            coefficients: beta.iter().copied().collect(),
            intercept,
            attempts: attempt + 1,
        });
    }
    Err(ExplainError::DegenerateDesign {
        attempts: config.max_attempts,
        n_samples: config.n_samples,
        n_segments: config.n_segments,
    })
}

/// Binary attribution marking the `top_k` segments with the largest positive
/// surrogate coefficients.
pub fn lime_explain<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    image: &Tensor<T>,
    target: usize,
    config: &LimeConfig,
    seed: u64,
) -> Result<Attribution<T>, ExplainError> {
    let fit = lime_fit(model, image, target, config, seed)?;
    let (side, _) = image.dims2();
    let g = config.validate(side)?;
    let mut chosen = vec![false; config.n_segments];
    for i in fit.top_positive(config.top_k) {
        chosen[i] = true;
    }
    let values = grid_segments(side, g)
        .into_iter()
        .map(|s| if chosen[s] { T::one() } else { T::zero() })
        .collect();
    Ok(Attribution {
        values: Tensor::new(&[side, side], values)?,
        kind: ExplainerKind::Lime,
        target: Some(target),
        binary: true,
    })
}
