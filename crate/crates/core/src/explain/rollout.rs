//! Attention rollout and TransLRP, both chained products of per-layer token
//! mixing matrices read out at the classification token.

use super::{aggregate_heads, upsample_patch_map, Attribution, ExplainError, ExplainerKind, HeadAggregation};
use crate::tensor;
use crate::vit::ForwardTrace;
use crate::{Scalar, Tensor};

/// `Ã_L` where `Ã_0 = I` and `Ã_l = rownorm(agg(A_l) + I) · Ã_{l-1}`.
pub fn rollout_matrix<T: Scalar>(attentions: &[Tensor<T>], method: HeadAggregation) -> Result<Tensor<T>, ExplainError> {
    let n = token_count(attentions)?;
    let mut acc = Tensor::identity(n);
    for a in attentions {
        let mut m = aggregate_heads(a, method)?;
        add_identity(&mut m);
        for r in 0..n {
            let row = m.row_mut(r);
            let s: T = row.iter().copied().sum();
            for v in row {
                *v = *v / s;
            }
        }
        acc = tensor::matmul(&m, &acc)?;
    }
    Ok(acc)
}

/// `Ā_L` where `Ā_0 = I` and `Ā_l = (mean_h(∇A_l ⊙ R_l)⁺ + I) · Ā_{l-1}`.
pub fn translrp_matrix<T: Scalar>(grads: &[Tensor<T>], relevances: &[Tensor<T>]) -> Result<Tensor<T>, ExplainError> {
    if grads.len() != relevances.len() {
        return Err(ExplainError::InvalidArgument(format!(
            "{} gradient maps for {} relevance maps",
            grads.len(),
            relevances.len()
        )));
    }
    let n = token_count(grads)?;
    let mut acc = Tensor::identity(n);
    for (g, r) in grads.iter().zip(relevances) {
        if g.shape() != r.shape() {
            return Err(ExplainError::InvalidArgument(format!(
                "gradient shape {:?} vs relevance shape {:?}",
                g.shape(),
                r.shape()
            )));
        }
        let gr = tensor::hadamard(g, r)?;
        let mut m = aggregate_heads(&gr, HeadAggregation::Average)?.map(|v| v.max(T::zero()));
        add_identity(&mut m);
        acc = tensor::matmul(&m, &acc)?;
    }
    Ok(acc)
}

/// Classification-token row of `product` without its first entry, as a
/// `[g, g]` patch grid.
pub fn cls_patch_scores<T: Scalar>(product: &Tensor<T>) -> Result<Tensor<T>, ExplainError> {
    let (n, _) = product.dims2();
    let patches = n - 1;
    let g = (patches as f64).sqrt().round() as usize;
    if g * g != patches {
        return Err(ExplainError::InvalidArgument(format!("{patches} patch tokens do not form a square grid")));
    }
    Ok(Tensor::new(&[g, g], product.row(0)[1..].to_vec())?)
}

/// Side length of the image that produced `trace`.
pub fn image_side<T: Scalar>(trace: &ForwardTrace<T>) -> usize {
    let (n_patches, patch_dim) = trace.patches.dims2();
    let grid = (n_patches as f64).sqrt().round() as usize;
    let patch = (patch_dim as f64).sqrt().round() as usize;
    grid * patch
}

/// Class-agnostic rollout of the recorded attention.
pub fn attention_rollout<T: Scalar>(trace: &ForwardTrace<T>, method: HeadAggregation) -> Result<Attribution<T>, ExplainError> {
    let attentions: Vec<Tensor<T>> = trace.attentions().cloned().collect();
    let raw = cls_patch_scores(&rollout_matrix(&attentions, method)?)?;
    let pixels = upsample_patch_map(&raw, image_side(trace))?;
    Ok(Attribution::from_raw(&pixels, ExplainerKind::Attention(method), None))
}

/// TransLRP attribution for the class whose gradients and relevances are given.
pub fn translrp<T: Scalar>(
    trace: &ForwardTrace<T>,
    grads: &[Tensor<T>],
    relevances: &[Tensor<T>],
    target: usize,
) -> Result<Attribution<T>, ExplainError> {
    if grads.len() != trace.layers.len() {
        return Err(ExplainError::InvalidArgument(format!(
            "{} gradient maps for {} layers",
            grads.len(),
            trace.layers.len()
        )));
    }
    for (g, l) in grads.iter().zip(&trace.layers) {
        if g.shape() != l.attention.shape() {
            return Err(ExplainError::InvalidArgument(format!(
                "gradient shape {:?} vs attention shape {:?}",
                g.shape(),
                l.attention.shape()
            )));
        }
    }
    let raw = cls_patch_scores(&translrp_matrix(grads, relevances)?)?;
    let pixels = upsample_patch_map(&raw, image_side(trace))?;
    Ok(Attribution::from_raw(&pixels, ExplainerKind::TransLrp, Some(target)))
}

fn token_count<T: Scalar>(maps: &[Tensor<T>]) -> Result<usize, ExplainError> {
    let first = maps
        .first()
        .ok_or_else(|| ExplainError::InvalidArgument("no attention layers".into()))?;
    match first.shape() {
        &[_, n, m] if n == m && n >= 2 => Ok(n),
        s => Err(ExplainError::InvalidArgument(format!("attention shape {s:?}"))),
    }
}

fn add_identity<T: Scalar>(m: &mut Tensor<T>) {
    let (n, _) = m.dims2();
    for i in 0..n {
        let v = m.at(&[i, i]);
        m.set(&[i, i], v + T::one());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye_heads(h: usize, n: usize) -> Tensor<f64> {
        Tensor::stack(&vec![Tensor::identity(n); h]).unwrap()
    }

    #[test]
    fn identity_attention_chain_is_identity() {
        let layers = vec![eye_heads(2, 5); 3];
        for m in [HeadAggregation::Average, HeadAggregation::Minimum] {
            assert_eq!(rollout_matrix(&layers, m).unwrap(), Tensor::identity(5));
        }
        let scores = cls_patch_scores(&rollout_matrix(&layers, HeadAggregation::Average).unwrap()).unwrap();
        assert!(scores.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_attention_gives_equal_patch_weights() {
        // n = 5: row 0 of rownorm(U + I) is (1/5 + 1, 1/5, 1/5, 1/5, 1/5) / 2.
        let layers = vec![Tensor::<f64>::full(&[1, 5, 5], 0.2)];
        let m = rollout_matrix(&layers, HeadAggregation::Average).unwrap();
        assert!((m.at(&[0, 0]) - 0.6).abs() < 1e-15);
        let scores = cls_patch_scores(&m).unwrap();
        assert!(scores.data().iter().all(|&v| (v - 0.1).abs() < 1e-15));
        let up = upsample_patch_map(&scores, 4).unwrap();
        assert!(super::super::normalize_map(&up).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_gradients_give_identity_chain() {
        let g = vec![Tensor::<f64>::zeros(&[2, 5, 5]); 2];
        let r = vec![Tensor::full(&[2, 5, 5], 0.3); 2];
        assert_eq!(translrp_matrix(&g, &r).unwrap(), Tensor::identity(5));
        assert!(translrp_matrix(&g, &r[..1]).is_err());
    }
}
