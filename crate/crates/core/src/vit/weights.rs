use rand_distr::{Distribution, Normal};

use super::{ViTConfig, VitError};
use crate::{rng, Scalar, Tensor};

/// Standard deviation of the truncated-normal initializer.
pub const INIT_STD: f64 = 0.02;

/// Parameters of one pre-norm transformer block. Linear maps are stored as
/// `[in, out]` and applied as `x @ w + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights<T> {
    pub ln1_gain: Tensor<T>,
    pub ln1_bias: Tensor<T>,
    pub wq: Tensor<T>,
    pub bq: Tensor<T>,
    pub wk: Tensor<T>,
    pub bk: Tensor<T>,
    pub wv: Tensor<T>,
    pub bv: Tensor<T>,
    pub wo: Tensor<T>,
    pub bo: Tensor<T>,
    pub ln2_gain: Tensor<T>,
    pub ln2_bias: Tensor<T>,
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
}

/// All trainable parameters. The classifier head is stored one row per class
/// (`[n_classes, embed_dim]`), so `logits = head_w @ z + head_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViTWeights<T> {
    pub patch_w: Tensor<T>,
    pub patch_b: Tensor<T>,
    pub cls_token: Tensor<T>,
    pub pos_embed: Tensor<T>,
    pub blocks: Vec<BlockWeights<T>>,
    pub ln_f_gain: Tensor<T>,
    pub ln_f_bias: Tensor<T>,
    pub head_w: Tensor<T>,
    pub head_b: Tensor<T>,
}

#[derive(Clone, Copy)]
enum Init {
    Normal,
    Zero,
    One,
}

/// Every parameter slot with its shape and initializer, in storage order.
fn layout(config: &ViTConfig) -> Vec<(String, Vec<usize>, Init)> {
    let (d, m) = (config.embed_dim, config.mlp_dim);
    let mut out = vec![
        ("patch.w".to_string(), vec![config.patch_dim(), d], Init::Normal),
        ("patch.b".to_string(), vec![d], Init::Zero),
        ("cls".to_string(), vec![d], Init::Normal),
        ("pos".to_string(), vec![config.n_tokens(), d], Init::Normal),
    ];
    for l in 0..config.n_layers {
        let p = |s: &str| format!("blocks.{l}.{s}");
        out.extend([
            (p("ln1.gain"), vec![d], Init::One),
            (p("ln1.bias"), vec![d], Init::Zero),
            (p("attn.q.w"), vec![d, d], Init::Normal),
            (p("attn.q.b"), vec![d], Init::Zero),
            (p("attn.k.w"), vec![d, d], Init::Normal),
            (p("attn.k.b"), vec![d], Init::Zero),
            (p("attn.v.w"), vec![d, d], Init::Normal),
            (p("attn.v.b"), vec![d], Init::Zero),
            (p("attn.out.w"), vec![d, d], Init::Normal),
            (p("attn.out.b"), vec![d], Init::Zero),
            (p("ln2.gain"), vec![d], Init::One),
            (p("ln2.bias"), vec![d], Init::Zero),
            (p("mlp.fc1.w"), vec![d, m], Init::Normal),
            (p("mlp.fc1.b"), vec![m], Init::Zero),
            (p("mlp.fc2.w"), vec![m, d], Init::Normal),
            (p("mlp.fc2.b"), vec![d], Init::Zero),
        ]);
    }
    out.extend([
        ("ln_f.gain".to_string(), vec![d], Init::One),
        ("ln_f.bias".to_string(), vec![d], Init::Zero),
        ("head.w".to_string(), vec![config.n_classes, d], Init::Normal),
        ("head.b".to_string(), vec![config.n_classes], Init::Zero),
    ]);
    out
}

/// Parameter names and shapes implied by `config`, in storage order.
pub fn parameter_layout(config: &ViTConfig) -> Vec<(String, Vec<usize>)> {
    layout(config).into_iter().map(|(n, s, _)| (n, s)).collect()
}

impl<T: Scalar> ViTWeights<T> {
    fn from_tensors(config: &ViTConfig, mut tensors: Vec<Tensor<T>>) -> Self {
        tensors.reverse();
        let mut next = || tensors.pop().expect("layout length");
        let patch_w = next();
        let patch_b = next();
        let cls_token = next();
        let pos_embed = next();
        let blocks = (0..config.n_layers)
            .map(|_| BlockWeights {
                ln1_gain: next(),
                ln1_bias: next(),
                wq: next(),
                bq: next(),
                wk: next(),
                bk: next(),
                wv: next(),
                bv: next(),
                wo: next(),
                bo: next(),
                ln2_gain: next(),
                ln2_bias: next(),
                w1: next(),
                b1: next(),
                w2: next(),
                b2: next(),
            })
            .collect();
        Self {
            patch_w,
            patch_b,
            cls_token,
            pos_embed,
            blocks,
            ln_f_gain: next(),
            ln_f_bias: next(),
            head_w: next(),
            head_b: next(),
        }
    }

    /// Seeded initialization: truncated normal (sigma 0.02, cut at 2 sigma)
    /// for projections and embeddings, zero biases, unit layer-norm gains.
    pub fn init(config: &ViTConfig, seed: u64) -> Result<Self, VitError> {
        config.validate()?;
        let mut rng = rng::stream(seed, &[rng::tag("vit-init")]);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let tensors = layout(config)
            .into_iter()
            .map(|(_, shape, init)| match init {
                Init::Zero => Tensor::zeros(&shape),
                Init::One => Tensor::full(&shape, T::one()),
                Init::Normal => Tensor::from_fn(&shape, |_| loop {
                    let v: f64 = normal.sample(&mut rng);
                    if v.abs() <= 2.0 * INIT_STD {
                        break T::c(v);
                    }
                }),
            })
            .collect();
        Ok(Self::from_tensors(config, tensors))
    }

    pub fn zeros(config: &ViTConfig) -> Self {
        let tensors = layout(config)
            .into_iter()
            .map(|(_, shape, _)| Tensor::zeros(&shape))
            .collect();
        Self::from_tensors(config, tensors)
    }

    /// Builds weights from tensors listed in [`parameter_layout`] order.
    pub fn from_ordered(config: &ViTConfig, tensors: Vec<Tensor<T>>) -> Result<Self, VitError> {
        let layout = parameter_layout(config);
        if layout.len() != tensors.len() {
            return Err(VitError::ConfigMismatch(format!(
                "expected {} tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in layout.iter().zip(&tensors) {
            if t.shape() != shape.as_slice() {
                return Err(VitError::ConfigMismatch(format!(
                    "{name}: expected shape {shape:?}, got {:?}",
                    t.shape()
                )));
            }
        }
        Ok(Self::from_tensors(config, tensors))
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = vec![&self.patch_w, &self.patch_b, &self.cls_token, &self.pos_embed];
        for b in &self.blocks {
            out.extend([
                &b.ln1_gain, &b.ln1_bias, &b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo, &b.bo,
                &b.ln2_gain, &b.ln2_bias, &b.w1, &b.b1, &b.w2, &b.b2,
            ]);
        }
        out.extend([&self.ln_f_gain, &self.ln_f_bias, &self.head_w, &self.head_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![
            &mut self.patch_w,
            &mut self.patch_b,
            &mut self.cls_token,
            &mut self.pos_embed,
        ];
        for b in &mut self.blocks {
            out.extend([
                &mut b.ln1_gain,
                &mut b.ln1_bias,
                &mut b.wq,
                &mut b.bq,
                &mut b.wk,
                &mut b.bk,
                &mut b.wv,
                &mut b.bv,
                &mut b.wo,
                &mut b.bo,
                &mut b.ln2_gain,
                &mut b.ln2_bias,
                &mut b.w1,
                &mut b.b1,
                &mut b.w2,
                &mut b.b2,
            ]);
        }
        out.extend([
            &mut self.ln_f_gain,
            &mut self.ln_f_bias,
            &mut self.head_w,
            &mut self.head_b,
        ]);
        out
    }

    /// Checks every shape against `config` and that all values are finite.
    pub fn validate(&self, config: &ViTConfig) -> Result<(), VitError> {
        config.validate()?;
        if self.blocks.len() != config.n_layers {
            return Err(VitError::ConfigMismatch(format!(
                "expected {} blocks, got {}",
                config.n_layers,
                self.blocks.len()
            )));
        }
        for ((name, shape), t) in parameter_layout(config).iter().zip(self.tensors()) {
            if t.shape() != shape.as_slice() {
                return Err(VitError::ConfigMismatch(format!(
                    "{name}: expected shape {shape:?}, got {:?}",
                    t.shape()
                )));
            }
            if !t.all_finite() {
                return Err(VitError::NonFinite(name.clone()));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self, config: &ViTConfig) -> ViTWeights<U> {
        ViTWeights::from_tensors(config, self.tensors().into_iter().map(|t| t.cast()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seeded_and_shaped() {
        let c = ViTConfig::default();
        let a = ViTWeights::<f32>::init(&c, 3).unwrap();
        let b = ViTWeights::<f32>::init(&c, 3).unwrap();
        let other = ViTWeights::<f32>::init(&c, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, other);
        a.validate(&c).unwrap();
        assert!(a.patch_w.data().iter().all(|v| v.abs() <= 0.04));
        assert!(a.patch_b.data().iter().all(|&v| v == 0.0));
        assert!(a.blocks[1].ln2_gain.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ordered_round_trip() {
        let c = ViTConfig::default();
        let w = ViTWeights::<f64>::init(&c, 1).unwrap();
        let again =
            ViTWeights::from_ordered(&c, w.tensors().into_iter().cloned().collect()).unwrap();
        assert_eq!(w, again);
        assert_eq!(parameter_layout(&c).len(), w.tensors().len());
    }
}
