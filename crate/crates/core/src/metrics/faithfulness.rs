use rand::seq::index;
use rayon::prelude::*;

use super::MetricsError;
use crate::rng;
use crate::vit::Model;
use crate::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct FaithfulnessConfig {
    /// Patches removed per run.
    pub subset_size: usize,
    pub n_runs: usize,
    pub baseline: f64,
    /// Side length of a square patch in pixels.
    pub patch_size: usize,
    /// Report `|correlation|`, for class-agnostic explainers.
    pub use_absolute: bool,
    pub seed: u64,
}

impl FaithfulnessConfig {
    /// Defaults for an image tiled by `n_patches` patches of side `patch_size`:
    /// 10% of the patches per subset (at least one), 100 runs, black baseline.
    pub fn for_grid(n_patches: usize, patch_size: usize) -> Self {
        Self {
            subset_size: ((n_patches as f64 * 0.1).round() as usize).max(1),
            n_runs: 100,
            baseline: 0.0,
            patch_size,
            use_absolute: false,
            seed: 0,
        }
    }

    fn grid(&self, shape: &[usize]) -> Result<(usize, usize), MetricsError> {
        let &[h, w] = shape else {
            return Err(MetricsError::Shape(format!("expected a 2-D image, got {shape:?}")));
        };
        let p = self.patch_size;
        if p == 0 || h % p != 0 || w % p != 0 {
            return Err(MetricsError::InvalidConfig(format!("{h}x{w} image is not tiled by {p}x{p} patches")));
        }
        let n = (h / p) * (w / p);
        if self.subset_size == 0 || self.subset_size >= n {
            return Err(MetricsError::InvalidConfig(format!(
                "subset size {} must be in 1..{n}",
                self.subset_size
            )));
        }
        if self.n_runs < 2 {
            return Err(MetricsError::InvalidConfig("n_runs must be at least 2".into()));
        }
        Ok((h / p, w / p))
    }
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    // spreads at the rounding level of the values count as zero variance
    let floor = |v: &[f64]| {
        let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        n * (8.0 * f64::EPSILON * m).powi(2)
    };
    if sxx <= floor(x) || syy <= floor(y) {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Copy of `image` with the listed patches (row-major over a grid of
/// `patch`-sized tiles) set to `baseline`.
pub fn remove_patches<T: Scalar>(image: &Tensor<T>, patch: usize, patches: &[usize], baseline: T) -> Tensor<T> {
    let (_, w) = image.dims2();
    let gw = w / patch;
    let mut out = image.clone();
    for &i in patches {
        let (r0, c0) = ((i / gw) * patch, (i % gw) * patch);
        for r in r0..r0 + patch {
            out.row_mut(r)[c0..c0 + patch].fill(baseline);
        }
    }
    out
}

/// The `(Δ logit, attribution mass)` pairs of every run, in run order.
pub fn faithfulness_pairs<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    image: &Tensor<T>,
    attribution: &Tensor<T>,
    target: usize,
    cfg: &FaithfulnessConfig,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    if attribution.shape() != image.shape() {
        return Err(MetricsError::Shape(format!(
            "attribution {:?} vs image {:?}",
            attribution.shape(),
            image.shape()
        )));
    }
    let (gh, gw) = cfg.grid(image.shape())?;
    let p = cfg.patch_size;
    let (_, w) = image.dims2();
    let mass: Vec<f64> = (0..gh * gw)
        .map(|i| {
            let (r0, c0) = ((i / gw) * p, (i % gw) * p);
            (r0..r0 + p)
                .flat_map(|r| attribution.data()[r * w + c0..r * w + c0 + p].iter())
                .map(|v| v.to_f64_lossy())
                .sum()
        })
        .collect();

    let mut rng = rng::stream(cfg.seed, &[rng::tag("faithfulness")]);
    let subsets: Vec<Vec<usize>> = (0..cfg.n_runs)
        .map(|_| index::sample(&mut rng, gh * gw, cfg.subset_size).into_vec())
        .collect();
    let base = logit(model, image, target)?;
    let baseline = T::c(cfg.baseline);
    subsets
        .par_iter()
        .map(|s| {
            let perturbed = remove_patches(image, p, s, baseline);
            let delta = base - logit(model, &perturbed, target)?;
            Ok((delta, s.iter().map(|&i| mass[i]).sum()))
        })
        .collect()
}

/// Pearson correlation between logit drops and removed attribution mass over
/// random patch subsets.
pub fn faithfulness_correlation<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    image: &Tensor<T>,
    attribution: &Tensor<T>,
    target: usize,
    cfg: &FaithfulnessConfig,
) -> Result<f64, MetricsError> {
    let pairs = faithfulness_pairs(model, image, attribution, target, cfg)?;
    let (d, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let r = pearson(&d, &a);
    Ok(if cfg.use_absolute { r.abs() } else { r })
}

fn logit<T: Scalar, M: Model<T> + ?Sized>(model: &M, image: &Tensor<T>, target: usize) -> Result<f64, MetricsError> {
    let logits = model.logits(image)?;
    logits
        .get(target)
        .map(|v| v.to_f64_lossy())
        .ok_or_else(|| MetricsError::InvalidConfig(format!("target {target} out of range for {} classes", logits.len())))
}
