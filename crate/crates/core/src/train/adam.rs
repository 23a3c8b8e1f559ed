use crate::vit::ViTWeights;
use crate::{Scalar, Tensor};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub learning_rate: f64,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(weights: &ViTWeights<T>, learning_rate: f64) -> Self {
        let zeros: Vec<Tensor<T>> = weights.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            learning_rate,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, weights: &mut ViTWeights<T>, grads: &ViTWeights<T>) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::c(ADAM_BETA1), T::c(ADAM_BETA2));
        let c1 = T::one() - T::c(ADAM_BETA1.powi(t));
        let c2 = T::one() - T::c(ADAM_BETA2.powi(t));
        let lr = T::c(self.learning_rate);
        let eps = T::c(ADAM_EPS);
        let one = T::one();
        for (((w, g), m), v) in weights
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((w, &g), m), v) in w
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
