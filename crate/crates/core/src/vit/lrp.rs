//! Layer-wise relevance propagation through the transformer.
//!
//! Propagation rules:
//!
//! * linear maps `y = x W + b`: epsilon rule
//!   `R_j = sum_k x_j w_jk / (z_k + eps * sign(z_k)) R_k` with `z_k = sum_j x_j w_jk`
//!   (the bias is excluded from the denominator, so mass is conserved up to eps);
//! * residual sums `y = a + b`: elementwise split in proportion to `a` and `b`;
//! * attention mixing `O = A V`: the relevance of `O[i, d]` is distributed over
//!   the contributions `A[i, j] V[j, d]`, then summed onto `A` and onto `V`, and
//!   each side keeps half the mass. The score product `Q K^T` is split the same
//!   way onto `Q` and `K`;
//! * layer norm, GELU and softmax pass relevance through unchanged.
//!
//! The half kept by `A` is the per-layer attention relevance `R_l`.

use super::forward::attention_scale;
use super::{ForwardTrace, ViTConfig, ViTWeights, VitError};
use crate::{sign_nonneg, tensor, Scalar, Tensor};

pub const DEFAULT_LRP_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Relevances<T> {
    /// Relevance placed on the logits before propagation (one-hot).
    pub logits: Tensor<T>,
    /// `R_l` at every attention map, `[n_heads, n, n]`.
    pub attention: Vec<Tensor<T>>,
    /// Total relevance entering each block from above, i.e. summed over that
    /// block's output tokens. Index `l` refers to the output of block `l`.
    pub block_output_mass: Vec<T>,
    /// Total relevance reaching the token embeddings.
    pub input_mass: T,
}

fn stabilize<T: Scalar>(z: T, eps: T) -> T {
    z + eps * sign_nonneg(z)
}

/// Epsilon rule through `y = x @ w` for `x: [r, in]`, `w: [in, out]`.
pub fn lrp_linear<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    relevance: &Tensor<T>,
    eps: T,
) -> Result<Tensor<T>, VitError> {
    let z = tensor::matmul(x, w)?;
    let s = z.zip_map(relevance, "lrp_linear", |z, r| r / stabilize(z, eps))?;
    let c = tensor::matmul(&s, &w.transpose())?;
    Ok(tensor::hadamard(x, &c)?)
}

/// Proportional split through the residual sum `a + b`.
fn lrp_add<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    relevance: &Tensor<T>,
    eps: T,
) -> Result<(Tensor<T>, Tensor<T>), VitError> {
    let mut ra = relevance.clone();
    let mut rb = relevance.clone();
    for (((ra, rb), &x), &y) in ra.data_mut().iter_mut().zip(rb.data_mut()).zip(a.data()).zip(b.data()) {
        let s = *ra / stabilize(x + y, eps);
        *ra = x * s;
        *rb = y * s;
    }
    Ok((ra, rb))
}

/// Splits the relevance of `a @ b` onto both factors, each receiving the full
/// mass (callers halve).
fn lrp_product<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    relevance: &Tensor<T>,
    eps: T,
) -> Result<(Tensor<T>, Tensor<T>), VitError> {
    let z = tensor::matmul(a, b)?;
    let s = z.zip_map(relevance, "lrp_product", |z, r| r / stabilize(z, eps))?;
    let ra = tensor::hadamard(a, &tensor::matmul(&s, &b.transpose())?)?;
    let rb = tensor::hadamard(b, &tensor::matmul(&a.transpose(), &s)?)?;
    Ok((ra, rb))
}

pub fn lrp_relevances<T: Scalar>(
    weights: &ViTWeights<T>,
    config: &ViTConfig,
    trace: &ForwardTrace<T>,
    target: usize,
    eps: T,
) -> Result<Relevances<T>, VitError> {
    if eps.is_nan() || eps <= T::zero() {
        return Err(VitError::InvalidEps(eps.to_f64_lossy()));
    }
    if target >= config.n_classes {
        return Err(VitError::TargetOutOfRange {
            target,
            n_classes: config.n_classes,
        });
    }
    let (n, d, dh) = (config.n_tokens(), config.embed_dim, config.head_dim());
    let half = T::c(0.5);
    let scale = attention_scale::<T>(config);

    let mut logits = Tensor::zeros(&[1, config.n_classes]);
    logits.data_mut()[target] = T::one();
    let r_norm = lrp_linear(&trace.cls_norm, &weights.head_w.transpose(), &logits, eps)?;
    let mut r = Tensor::zeros(&[n, d]);
    r.row_mut(0).copy_from_slice(r_norm.data());

    let mut attention = vec![None; config.n_layers];
    let mut block_output_mass = vec![T::zero(); config.n_layers];
    for (l, (blk, lt)) in weights.blocks.iter().zip(&trace.layers).enumerate().rev() {
        block_output_mass[l] = r.sum();
        let (r_mid, r_mlp) = lrp_add(&lt.x_mid, &lt.mlp_out, &r, eps)?;
        let r_act = lrp_linear(&lt.act, &blk.w2, &r_mlp, eps)?;
        let r_h2 = lrp_linear(&lt.h2, &blk.w1, &r_act, eps)?;
        let mut r_mid_total = r_mid;
        r_mid_total.add_assign(&r_h2);

        let (r_in, r_attn) = lrp_add(&lt.x_in, &lt.attn_out, &r_mid_total, eps)?;
        let r_ctx = lrp_linear(&lt.context, &blk.wo, &r_attn, eps)?;
        let mut rq = Tensor::zeros(&[n, d]);
        let mut rk = Tensor::zeros(&[n, d]);
        let mut rv = Tensor::zeros(&[n, d]);
        let mut heads = Vec::with_capacity(config.n_heads);
        for h in 0..config.n_heads {
            let a = lt.attention.slab(h);
            let vh = lt.v.columns(h * dh, dh);
            let (ra, rvh) = lrp_product(&a, &vh, &r_ctx.columns(h * dh, dh), eps)?;
            let ra = ra.scale(half);
            rv.set_columns(h * dh, &rvh.scale(half));
            let qh = lt.q.columns(h * dh, dh).scale(scale);
            let kt = lt.k.columns(h * dh, dh).transpose();
            let (rqh, rkt) = lrp_product(&qh, &kt, &ra, eps)?;
            rq.set_columns(h * dh, &rqh.scale(half));
            rk.set_columns(h * dh, &rkt.transpose().scale(half));
            heads.push(ra);
        }
        attention[l] = Some(Tensor::stack(&heads)?);
        let mut r_h1 = lrp_linear(&lt.h1, &blk.wq, &rq, eps)?;
        r_h1.add_assign(&lrp_linear(&lt.h1, &blk.wk, &rk, eps)?);
        r_h1.add_assign(&lrp_linear(&lt.h1, &blk.wv, &rv, eps)?);
        let mut next = r_in;
        next.add_assign(&r_h1);
        r = next;
    }

    Ok(Relevances {
        logits: logits.reshape(&[config.n_classes])?,
        attention: attention.into_iter().map(|a| a.expect("every layer visited")).collect(),
        block_output_mass,
        input_mass: r.sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_linear_layer_conserves_mass() {
        let x = Tensor::<f64>::from_rows(&[&[0.5, 1.5, 0.25]]);
        let w = Tensor::<f64>::from_rows(&[&[0.2, 1.0], &[0.7, 0.1], &[0.3, 0.9]]);
        let r_out = Tensor::<f64>::from_rows(&[&[0.6, 0.4]]);
        let r_in = lrp_linear(&x, &w, &r_out, 1e-9).unwrap();
        assert!(r_in.data().iter().all(|&v| v > 0.0));
        assert!((r_in.sum() - 1.0).abs() < 0.01);
        let expected = 0.5 * 0.2 / (0.1 + 1.05 + 0.075) * 0.6 + 0.5 * 1.0 / (0.5 + 0.15 + 0.225) * 0.4;
        assert!((r_in.data()[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn residual_and_product_splits_conserve() {
        let a = Tensor::<f64>::from_rows(&[&[1.0, -2.0], &[0.5, 3.0]]);
        let b = Tensor::<f64>::from_rows(&[&[0.5, 1.0], &[2.0, -1.0]]);
        let r = Tensor::<f64>::from_rows(&[&[0.1, 0.2], &[0.3, 0.4]]);
        let (ra, rb) = lrp_add(&a, &b, &r, 1e-12).unwrap();
        assert!((ra.sum() + rb.sum() - r.sum()).abs() < 1e-9);
        let (pa, pb) = lrp_product(&a, &b, &r, 1e-12).unwrap();
        assert!((pa.sum() - r.sum()).abs() < 1e-9);
        assert!((pb.sum() - r.sum()).abs() < 1e-9);
    }
}
