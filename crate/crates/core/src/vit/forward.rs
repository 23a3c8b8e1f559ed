use super::{patchify, ViTConfig, ViTWeights, VitError};
use crate::tensor::{self, LAYERNORM_EPS};
use crate::{Scalar, Tensor};

/// Activations of one transformer block, enough for backward and LRP.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace<T> {
    pub x_in: Tensor<T>,
    pub h1: Tensor<T>,
    pub q: Tensor<T>,
    pub k: Tensor<T>,
    pub v: Tensor<T>,
    /// Post-softmax attention, `[n_heads, n, n]`.
    pub attention: Tensor<T>,
    /// Heads concatenated back to `[n, embed_dim]`.
    pub context: Tensor<T>,
    pub attn_out: Tensor<T>,
    pub x_mid: Tensor<T>,
    pub h2: Tensor<T>,
    pub pre_act: Tensor<T>,
    pub act: Tensor<T>,
    pub mlp_out: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    /// Standardized patch vectors, `[n_patches, patch_dim]`.
    pub patches: Tensor<T>,
    /// Token embeddings entering the first block, `[n, embed_dim]`.
    pub tokens: Tensor<T>,
    pub layers: Vec<LayerTrace<T>>,
    /// Classification-token row leaving the last block, `[1, embed_dim]`.
    pub cls_out: Tensor<T>,
    /// `cls_out` after the final layer norm.
    pub cls_norm: Tensor<T>,
    pub logits: Tensor<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn attention(&self, layer: usize) -> &Tensor<T> {
        &self.layers[layer].attention
    }

    pub fn attentions(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().map(|l| &l.attention)
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.shape()[0]
    }

    pub fn predicted_class(&self) -> usize {
        argmax(self.logits.data())
    }
}

pub(crate) fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Pixels are standardized as `(x - PIXEL_MEAN) / PIXEL_STD` before the patch
/// projection.
pub const PIXEL_MEAN: f64 = 0.5;
pub const PIXEL_STD: f64 = 0.25;

pub(crate) fn linear<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, VitError> {
    Ok(tensor::add_bias(&tensor::matmul(x, w)?, b)?)
}

pub(crate) fn attention_scale<T: Scalar>(config: &ViTConfig) -> T {
    T::one() / T::c(config.head_dim() as f64).sqrt()
}

pub fn forward<T: Scalar>(
    weights: &ViTWeights<T>,
    config: &ViTConfig,
    image: &Tensor<T>,
) -> Result<ForwardTrace<T>, VitError> {
    forward_with_attention_hook(weights, config, image, &mut |_, _| {})
}

/// Forward pass that lets `hook(layer, attention)` edit each post-softmax
/// attention tensor before it mixes the values. The trace records the edited
/// attention.
pub fn forward_with_attention_hook<T: Scalar>(
    weights: &ViTWeights<T>,
    config: &ViTConfig,
    image: &Tensor<T>,
    hook: &mut dyn FnMut(usize, &mut Tensor<T>),
) -> Result<ForwardTrace<T>, VitError> {
    if image.shape() != [config.image_size, config.image_size] {
        return Err(VitError::ImageShape {
            expected: format!("[{0}, {0}]", config.image_size),
            got: image.shape().to_vec(),
        });
    }
    if weights.blocks.len() != config.n_layers {
        return Err(VitError::ConfigMismatch(format!(
            "{} blocks for {} layers",
            weights.blocks.len(),
            config.n_layers
        )));
    }
    let eps = T::c(LAYERNORM_EPS);
    let (n, d) = (config.n_tokens(), config.embed_dim);
    let (mean, inv_std) = (T::c(PIXEL_MEAN), T::c(1.0 / PIXEL_STD));
    let patches = patchify(image, config.patch_size)?.map(|v| (v - mean) * inv_std);
    let embedded = linear(&patches, &weights.patch_w, &weights.patch_b)?;
    let mut tokens = Tensor::zeros(&[n, d]);
    tokens.row_mut(0).copy_from_slice(weights.cls_token.data());
    for i in 1..n {
        tokens.row_mut(i).copy_from_slice(embedded.row(i - 1));
    }
    let tokens = tensor::add(&tokens, &weights.pos_embed)?;

    let scale = attention_scale::<T>(config);
    let dh = config.head_dim();
    let mut x = tokens.clone();
    let mut layers = Vec::with_capacity(config.n_layers);
    for (l, blk) in weights.blocks.iter().enumerate() {
        let h1 = tensor::layernorm(&x, &blk.ln1_gain, &blk.ln1_bias, eps)?;
        let q = linear(&h1, &blk.wq, &blk.bq)?;
        let k = linear(&h1, &blk.wk, &blk.bk)?;
        let v = linear(&h1, &blk.wv, &blk.bv)?;
        let mut heads = Vec::with_capacity(config.n_heads);
        for h in 0..config.n_heads {
            let qh = q.columns(h * dh, dh);
            let kh = k.columns(h * dh, dh);
            let scores = tensor::matmul(&qh, &kh.transpose())?.scale(scale);
            heads.push(tensor::softmax(&scores, 1)?);
        }
        let mut attention = Tensor::stack(&heads)?;
        hook(l, &mut attention);
        let mut context = Tensor::zeros(&[n, d]);
        for h in 0..config.n_heads {
            let vh = v.columns(h * dh, dh);
            let oh = tensor::matmul(&attention.slab(h), &vh)?;
            context.set_columns(h * dh, &oh);
        }
        let attn_out = linear(&context, &blk.wo, &blk.bo)?;
        let x_mid = tensor::add(&x, &attn_out)?;
        let h2 = tensor::layernorm(&x_mid, &blk.ln2_gain, &blk.ln2_bias, eps)?;
        let pre_act = linear(&h2, &blk.w1, &blk.b1)?;
        let act = tensor::gelu(&pre_act);
        let mlp_out = linear(&act, &blk.w2, &blk.b2)?;
        let x_out = tensor::add(&x_mid, &mlp_out)?;
        layers.push(LayerTrace {
            x_in: std::mem::replace(&mut x, x_out),
            h1,
            q,
            k,
            v,
            attention,
            context,
            attn_out,
            x_mid,
            h2,
            pre_act,
            act,
            mlp_out,
        });
    }
    let cls_out = Tensor::new(&[1, d], x.row(0).to_vec())?;
    let cls_norm = tensor::layernorm(&cls_out, &weights.ln_f_gain, &weights.ln_f_bias, eps)?;
    let logits = linear(&cls_norm, &weights.head_w.transpose(), &weights.head_b)?
        .reshape(&[config.n_classes])?;
    Ok(ForwardTrace {
        patches,
        tokens,
        layers,
        cls_out,
        cls_norm,
        logits,
    })
}
