use super::forward::attention_scale;
use super::{ForwardTrace, ViTConfig, ViTWeights, VitError};
use crate::tensor::{self, LAYERNORM_EPS};
use crate::{Scalar, Tensor};

/// Result of back-propagating an upstream logit gradient.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub weights: ViTWeights<T>,
    /// `dL/dA_l` for every layer, `[n_heads, n, n]`, with each post-softmax
    /// attention entry treated as an independent variable.
    pub attention: Vec<Tensor<T>>,
}

fn linear_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    upstream: &Tensor<T>,
    gw: &mut Tensor<T>,
    gb: &mut Tensor<T>,
) -> Result<Tensor<T>, VitError> {
    let (_, gbias) = tensor::add_bias_backward(upstream);
    let (gx, gweight) = tensor::matmul_backward(x, w, upstream)?;
    gw.add_assign(&gweight);
    gb.add_assign(&gbias);
    Ok(gx)
}

/// Back-propagates `dlogits = dL/dlogits` through the recorded forward pass.
pub fn backward<T: Scalar>(
    weights: &ViTWeights<T>,
    config: &ViTConfig,
    trace: &ForwardTrace<T>,
    dlogits: &[T],
) -> Result<Gradients<T>, VitError> {
    if dlogits.len() != config.n_classes || trace.layers.len() != config.n_layers {
        return Err(VitError::ConfigMismatch(format!(
            "upstream of length {} / trace of {} layers for config {config:?}",
            dlogits.len(),
            trace.layers.len()
        )));
    }
    let eps = T::c(LAYERNORM_EPS);
    let (n, d, dh) = (config.n_tokens(), config.embed_dim, config.head_dim());
    let scale = attention_scale::<T>(config);
    let mut g = ViTWeights::zeros(config);
    let up = Tensor::new(&[1, config.n_classes], dlogits.to_vec())?;

    // logits = cls_norm @ head_w^T + head_b
    let (dnorm, dhead_t) = tensor::matmul_backward(&trace.cls_norm, &weights.head_w.transpose(), &up)?;
    g.head_w.add_assign(&dhead_t.transpose());
    g.head_b.add_assign(&up.reshape(&[config.n_classes])?);
    let ln_f = tensor::layernorm_backward(&trace.cls_out, &weights.ln_f_gain, eps, &dnorm)?;
    g.ln_f_gain.add_assign(&ln_f.gain);
    g.ln_f_bias.add_assign(&ln_f.bias);
    let mut dx = Tensor::zeros(&[n, d]);
    dx.row_mut(0).copy_from_slice(ln_f.input.data());

    let mut attention_grads = vec![None; config.n_layers];
    for (l, (blk, lt)) in weights.blocks.iter().zip(&trace.layers).enumerate().rev() {
        let gb = &mut g.blocks[l];
        // x_out = x_mid + mlp(x_mid)
        let dact = linear_backward(&lt.act, &blk.w2, &dx, &mut gb.w2, &mut gb.b2)?;
        let dpre = tensor::gelu_backward(&lt.pre_act, &dact)?;
        let dh2 = linear_backward(&lt.h2, &blk.w1, &dpre, &mut gb.w1, &mut gb.b1)?;
        let ln2 = tensor::layernorm_backward(&lt.x_mid, &blk.ln2_gain, eps, &dh2)?;
        gb.ln2_gain.add_assign(&ln2.gain);
        gb.ln2_bias.add_assign(&ln2.bias);
        let mut dmid = dx;
        dmid.add_assign(&ln2.input);

        // x_mid = x_in + attn(x_in)
        let dctx = linear_backward(&lt.context, &blk.wo, &dmid, &mut gb.wo, &mut gb.bo)?;
        let mut dq = Tensor::zeros(&[n, d]);
        let mut dk = Tensor::zeros(&[n, d]);
        let mut dv = Tensor::zeros(&[n, d]);
        let mut da_heads = Vec::with_capacity(config.n_heads);
        for h in 0..config.n_heads {
            let a = lt.attention.slab(h);
            let (qh, kh, vh) = (
                lt.q.columns(h * dh, dh),
                lt.k.columns(h * dh, dh),
                lt.v.columns(h * dh, dh),
            );
            let (da, dvh) = tensor::matmul_backward(&a, &vh, &dctx.columns(h * dh, dh))?;
            let dscores = tensor::softmax_backward(&a, &da, 1)?.scale(scale);
            let (dqh, dkt) = tensor::matmul_backward(&qh, &kh.transpose(), &dscores)?;
            dq.set_columns(h * dh, &dqh);
            dk.set_columns(h * dh, &dkt.transpose());
            dv.set_columns(h * dh, &dvh);
            da_heads.push(da);
        }
        attention_grads[l] = Some(Tensor::stack(&da_heads)?);
        let mut dh1 = linear_backward(&lt.h1, &blk.wq, &dq, &mut gb.wq, &mut gb.bq)?;
        dh1.add_assign(&linear_backward(&lt.h1, &blk.wk, &dk, &mut gb.wk, &mut gb.bk)?);
        dh1.add_assign(&linear_backward(&lt.h1, &blk.wv, &dv, &mut gb.wv, &mut gb.bv)?);
        let ln1 = tensor::layernorm_backward(&lt.x_in, &blk.ln1_gain, eps, &dh1)?;
        gb.ln1_gain.add_assign(&ln1.gain);
        gb.ln1_bias.add_assign(&ln1.bias);
        dmid.add_assign(&ln1.input);
        dx = dmid;
    }

    g.pos_embed.add_assign(&dx);
    g.cls_token.data_mut().iter_mut().zip(dx.row(0)).for_each(|(a, &b)| *a = *a + b);
    let demb = Tensor::new(&[n - 1, d], dx.data()[d..].to_vec())?;
    let mut gpw = Tensor::zeros(g.patch_w.shape());
    let mut gpb = Tensor::zeros(g.patch_b.shape());
    linear_backward(&trace.patches, &weights.patch_w, &demb, &mut gpw, &mut gpb)?;
    g.patch_w.add_assign(&gpw);
    g.patch_b.add_assign(&gpb);

    Ok(Gradients {
        weights: g,
        attention: attention_grads.into_iter().map(|a| a.expect("every layer visited")).collect(),
    })
}

/// `d logit[target] / d A_l` for every layer (pre-softmax-probability logit).
pub fn attention_gradients<T: Scalar>(
    weights: &ViTWeights<T>,
    config: &ViTConfig,
    trace: &ForwardTrace<T>,
    target: usize,
) -> Result<Vec<Tensor<T>>, VitError> {
    if target >= config.n_classes {
        return Err(VitError::TargetOutOfRange {
            target,
            n_classes: config.n_classes,
        });
    }
    let mut onehot = vec![T::zero(); config.n_classes];
    onehot[target] = T::one();
    Ok(backward(weights, config, trace, &onehot)?.attention)
}
