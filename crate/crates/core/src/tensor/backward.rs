//! Backward companions of the forward kernels.
//!
//! Every function takes the values cached by the forward call plus the
//! upstream gradient `dL/d(output)` and returns `dL/d(input)` for each input.

use super::ops::{self, axis_split, row_stats};
use super::{mismatch, Tensor, TensorError};
use crate::Scalar;

fn check_same(op: &'static str, expected: &[usize], upstream: &Tensor<impl Scalar>) -> Result<(), TensorError> {
    if expected != upstream.shape() {
        return Err(mismatch(op, expected, upstream.shape()));
    }
    Ok(())
}

/// Gradients of `a @ b`: `(g @ b^T, a^T @ g)`.
pub fn matmul_backward<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>), TensorError> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(mismatch("matmul_backward", a.shape(), b.shape()));
    }
    check_same("matmul_backward", &[a.shape()[0], b.shape()[1]], upstream)?;
    let ga = ops::matmul(upstream, &b.transpose())?;
    let gb = ops::matmul(&a.transpose(), upstream)?;
    Ok((ga, gb))
}

/// Gradient of softmax given its output `y`: `y * (g - sum(g * y))` along `axis`.
pub fn softmax_backward<T: Scalar>(
    y: &Tensor<T>,
    upstream: &Tensor<T>,
    axis: usize,
) -> Result<Tensor<T>, TensorError> {
    check_same("softmax_backward", y.shape(), upstream)?;
    let (outer, len, inner) = axis_split(y.shape(), axis)?;
    let (yd, gd) = (y.data(), upstream.data());
    let mut out = vec![T::zero(); y.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |j: usize| (o * len + j) * inner + i;
            let dot: T = (0..len).map(|j| yd[idx(j)] * gd[idx(j)]).sum();
            for j in 0..len {
                out[idx(j)] = yd[idx(j)] * (gd[idx(j)] - dot);
            }
        }
    }
    Ok(Tensor::from_parts(y.shape().to_vec(), out))
}

#[derive(Debug, Clone)]
pub struct LayerNormGrads<T> {
    pub input: Tensor<T>,
    pub gain: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn layernorm_backward<T: Scalar>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    eps: T,
    upstream: &Tensor<T>,
) -> Result<LayerNormGrads<T>, TensorError> {
    check_same("layernorm_backward", x.shape(), upstream)?;
    let d = *x.shape().last().expect("rank >= 1");
    if gain.len() != d {
        return Err(mismatch("layernorm_backward", x.shape(), gain.shape()));
    }
    let n = T::c(d as f64);
    let mut dx = Vec::with_capacity(x.len());
    let mut dgain = vec![T::zero(); d];
    let mut dbias = vec![T::zero(); d];
    for (row, grow) in x.data().chunks(d).zip(upstream.data().chunks(d)) {
        let (mean, inv) = row_stats(row, eps);
        let xhat: Vec<T> = row.iter().map(|&v| (v - mean) * inv).collect();
        let dxhat: Vec<T> = grow.iter().zip(gain.data()).map(|(&g, &w)| g * w).collect();
        let sum_dxhat: T = dxhat.iter().copied().sum();
        let sum_dxhat_xhat: T = dxhat.iter().zip(&xhat).map(|(&a, &b)| a * b).sum();
        for j in 0..d {
            dx.push(inv / n * (n * dxhat[j] - sum_dxhat - xhat[j] * sum_dxhat_xhat));
            dgain[j] = dgain[j] + grow[j] * xhat[j];
            dbias[j] = dbias[j] + grow[j];
        }
    }
    Ok(LayerNormGrads {
        input: Tensor::from_parts(x.shape().to_vec(), dx),
        gain: Tensor::from_parts(vec![d], dgain),
        bias: Tensor::from_parts(vec![d], dbias),
    })
}

pub fn gelu_backward<T: Scalar>(x: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let k = T::c(ops::GELU_SQRT_2_OVER_PI);
    let c = T::c(ops::GELU_CUBIC);
    let half = T::c(0.5);
    x.zip_map(upstream, "gelu_backward", |v, g| {
        let t = (k * (v + c * v * v * v)).tanh();
        let dinner = k * (T::one() + T::c(3.0) * c * v * v);
        g * (half * (T::one() + t) + half * v * (T::one() - t * t) * dinner)
    })
}

pub fn add_backward<T: Scalar>(
    shape: &[usize],
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>), TensorError> {
    check_same("add_backward", shape, upstream)?;
    Ok((upstream.clone(), upstream.clone()))
}

/// Gradients of [`ops::add_bias`]: the input gradient passes through, the
/// bias gradient sums over every leading index.
pub fn add_bias_backward<T: Scalar>(upstream: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    let d = *upstream.shape().last().expect("rank >= 1");
    let mut gb = vec![T::zero(); d];
    for row in upstream.data().chunks(d) {
        for (o, &v) in gb.iter_mut().zip(row) {
            *o = *o + v;
        }
    }
    (upstream.clone(), Tensor::from_parts(vec![d], gb))
}

pub fn hadamard_backward<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>), TensorError> {
    check_same("hadamard_backward", a.shape(), b)?;
    check_same("hadamard_backward", a.shape(), upstream)?;
    Ok((ops::hadamard(upstream, b)?, ops::hadamard(upstream, a)?))
}

/// A forward call together with the values its backward pass needs.
#[derive(Debug, Clone)]
pub enum OpRecord<T> {
    Matmul { a: Tensor<T>, b: Tensor<T> },
    Softmax { x: Tensor<T>, axis: usize },
    LayerNorm { x: Tensor<T>, gain: Tensor<T>, bias: Tensor<T>, eps: T },
    Gelu { x: Tensor<T> },
    Add { a: Tensor<T>, b: Tensor<T> },
    Hadamard { a: Tensor<T>, b: Tensor<T> },
}

impl<T: Scalar> OpRecord<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Matmul { .. } => "matmul",
            Self::Softmax { .. } => "softmax",
            Self::LayerNorm { .. } => "layernorm",
            Self::Gelu { .. } => "gelu",
            Self::Add { .. } => "add",
            Self::Hadamard { .. } => "hadamard",
        }
    }

    pub fn forward(&self) -> Result<Tensor<T>, TensorError> {
        match self {
            Self::Matmul { a, b } => ops::matmul(a, b),
            Self::Softmax { x, axis } => ops::softmax(x, *axis),
            Self::LayerNorm { x, gain, bias, eps } => ops::layernorm(x, gain, bias, *eps),
            Self::Gelu { x } => Ok(ops::gelu(x)),
            Self::Add { a, b } => ops::add(a, b),
            Self::Hadamard { a, b } => ops::hadamard(a, b),
        }
    }

    /// Inputs in the order [`backward_of`] returns their gradients.
    pub fn inputs(&self) -> Vec<&Tensor<T>> {
        match self {
            Self::Matmul { a, b } | Self::Add { a, b } | Self::Hadamard { a, b } => vec![a, b],
            Self::Softmax { x, .. } | Self::Gelu { x } => vec![x],
            Self::LayerNorm { x, gain, bias, .. } => vec![x, gain, bias],
        }
    }

    pub fn inputs_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Self::Matmul { a, b } | Self::Add { a, b } | Self::Hadamard { a, b } => vec![a, b],
            Self::Softmax { x, .. } | Self::Gelu { x } => vec![x],
            Self::LayerNorm { x, gain, bias, .. } => vec![x, gain, bias],
        }
    }
}

/// Dispatches to the backward companion of the recorded op.
pub fn backward_of<T: Scalar>(
    record: &OpRecord<T>,
    upstream: &Tensor<T>,
) -> Result<Vec<Tensor<T>>, TensorError> {
    Ok(match record {
        OpRecord::Matmul { a, b } => {
            let (ga, gb) = matmul_backward(a, b, upstream)?;
            vec![ga, gb]
        }
        OpRecord::Softmax { x, axis } => {
            let y = ops::softmax(x, *axis)?;
            vec![softmax_backward(&y, upstream, *axis)?]
        }
        OpRecord::LayerNorm { x, gain, eps, .. } => {
            let g = layernorm_backward(x, gain, *eps, upstream)?;
            vec![g.input, g.gain, g.bias]
        }
        OpRecord::Gelu { x } => vec![gelu_backward(x, upstream)?],
        OpRecord::Add { a, .. } => {
            let (ga, gb) = add_backward(a.shape(), upstream)?;
            vec![ga, gb]
        }
        OpRecord::Hadamard { a, b } => {
            let (ga, gb) = hadamard_backward(a, b, upstream)?;
            vec![ga, gb]
        }
    })
}
