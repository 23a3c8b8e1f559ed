use serde::{Deserialize, Serialize};

use super::{ExplainError, ExplainerKind};
use crate::{Scalar, Tensor};

/// A per-pixel saliency map with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution<T> {
    pub values: Tensor<T>,
    pub kind: ExplainerKind,
    /// `None` for class-agnostic explainers.
    pub target: Option<usize>,
    /// Binary maps hold only 0 and 1.
    pub binary: bool,
}

impl<T: Scalar> Attribution<T> {
    /// Min-max normalizes `raw` into a continuous attribution.
    pub fn from_raw(raw: &Tensor<T>, kind: ExplainerKind, target: Option<usize>) -> Self {
        Self {
            values: normalize_map(raw),
            kind,
            target,
            binary: false,
        }
    }

    pub fn side(&self) -> usize {
        self.values.shape()[0]
    }

    /// Summary used in report headers and logs.
    pub fn info(&self) -> AttributionInfo {
        AttributionInfo {
            explainer: self.kind.name(),
            target: self.target,
            binary: self.binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionInfo {
    pub explainer: String,
    pub target: Option<usize>,
    pub binary: bool,
}

/// Maps `raw` affinely onto `[0, 1]`. A map whose spread is within a few ulps
/// of its magnitude is treated as constant and becomes all zeros.
pub fn normalize_map<T: Scalar>(raw: &Tensor<T>) -> Tensor<T> {
    let (lo, hi) = raw
        .data()
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let tol = T::c(4.0) * T::epsilon() * raw.max_abs();
    let range = hi - lo;
    if raw.is_empty() || range.is_nan() || range <= tol {
        return Tensor::zeros(raw.shape());
    }
    raw.map(|v| ((v - lo) / range).max(T::zero()).min(T::one()))
}

/// Nearest-neighbour expansion of a `[g, g]` patch map to `[size, size]`.
pub fn upsample_patch_map<T: Scalar>(map: &Tensor<T>, size: usize) -> Result<Tensor<T>, ExplainError> {
    let (gh, gw) = grid_of(map)?;
    if gh != gw || size == 0 || !size.is_multiple_of(gh) {
        return Err(ExplainError::InvalidArgument(format!(
            "cannot upsample a {gh}x{gw} map to {size}x{size}"
        )));
    }
    let block = size / gh;
    Ok(Tensor::from_fn(&[size, size], |i| {
        let (r, c) = (i / size, i % size);
        map.data()[(r / block) * gw + c / block]
    }))
}

/// Mean over each `block x block` tile. Inverse of [`upsample_patch_map`] on
/// block-constant images.
pub fn downsample_block_mean<T: Scalar>(image: &Tensor<T>, block: usize) -> Result<Tensor<T>, ExplainError> {
    let (h, w) = grid_of(image)?;
    if block == 0 || h % block != 0 || w % block != 0 {
        return Err(ExplainError::InvalidArgument(format!(
            "{h}x{w} image is not tiled by {block}x{block} blocks"
        )));
    }
    let (gh, gw) = (h / block, w / block);
    let mut out = vec![T::zero(); gh * gw];
    for r in 0..h {
        for c in 0..w {
            let cell = &mut out[(r / block) * gw + c / block];
            *cell = *cell + image.data()[r * w + c];
        }
    }
    let inv = T::c(1.0 / (block * block) as f64);
    Ok(Tensor::new(&[gh, gw], out.into_iter().map(|v| v * inv).collect())?)
}

fn grid_of<T: Scalar>(t: &Tensor<T>) -> Result<(usize, usize), ExplainError> {
    match t.shape() {
        &[h, w] => Ok((h, w)),
        s => Err(ExplainError::InvalidArgument(format!("expected a 2-D map, got shape {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsample_replicates_blocks() {
        let m = Tensor::<f64>::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let up = upsample_patch_map(&m, 4).unwrap();
        assert_eq!(up.row(0), &[1.0, 1.0, 2.0, 2.0]);
        assert_eq!(up.row(3), &[3.0, 3.0, 4.0, 4.0]);
        assert!(upsample_patch_map(&m, 5).is_err());
        let c = upsample_patch_map(&Tensor::full(&[2, 2], 0.3), 6).unwrap();
        assert!(c.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn normalization_rules() {
        let n = normalize_map(&Tensor::<f64>::from_rows(&[&[2.0, 4.0], &[3.0, 2.0]]));
        assert_eq!(n.data(), &[0.0, 1.0, 0.5, 0.0]);
        assert!(normalize_map(&Tensor::full(&[3, 3], 0.7)).data().iter().all(|&v| v == 0.0));
        assert!(normalize_map(&Tensor::<f64>::zeros(&[2, 2])).data().iter().all(|&v| v == 0.0));
    }
}
