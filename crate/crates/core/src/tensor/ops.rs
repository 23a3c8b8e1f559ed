use super::{mismatch, Tensor, TensorError};
use crate::Scalar;

/// Epsilon added to the variance inside [`layernorm`].
pub const LAYERNORM_EPS: f64 = 1e-5;

/// `sqrt(2 / pi)` in the tanh approximation of GELU.
pub const GELU_SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
/// Cubic coefficient of the tanh approximation of GELU.
pub const GELU_CUBIC: f64 = 0.044_715;

/// Matrix product `[m, k] x [k, n] -> [m, n]`.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    if a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0] {
        return Err(mismatch("matmul", &a.shape, &b.shape));
    }
    let (m, k) = (a.shape[0], a.shape[1]);
    let n = b.shape[1];
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    Ok(Tensor::from_parts(vec![m, n], out))
}

/// Splits a shape around `axis` into (outer, length, inner) strides.
pub(super) fn axis_split(shape: &[usize], axis: usize) -> Result<(usize, usize, usize), TensorError> {
    if axis >= shape.len() {
        return Err(TensorError::InvalidAxis {
            axis,
            rank: shape.len(),
        });
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

/// Numerically stable softmax along `axis` (the maximum is subtracted first).
pub fn softmax<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>, TensorError> {
    let (outer, len, inner) = axis_split(&x.shape, axis)?;
    let mut out = x.data.clone();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |j: usize| (o * len + j) * inner + i;
            let max = (0..len)
                .map(|j| x.data[idx(j)])
                .fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for j in 0..len {
                let e = (x.data[idx(j)] - max).exp();
                out[idx(j)] = e;
                total = total + e;
            }
            for j in 0..len {
                out[idx(j)] = out[idx(j)] / total;
            }
        }
    }
    Ok(Tensor::from_parts(x.shape.clone(), out))
}

/// Layer normalization over the last axis followed by `gain * x_hat + bias`.
pub fn layernorm<T: Scalar>(
    x: &Tensor<T>,
    gain: &Tensor<T>,
    bias: &Tensor<T>,
    eps: T,
) -> Result<Tensor<T>, TensorError> {
    let d = *x.shape.last().expect("rank >= 1");
    if gain.len() != d || bias.len() != d {
        return Err(mismatch("layernorm", &x.shape, &gain.shape));
    }
    let mut out = Vec::with_capacity(x.len());
    for row in x.data.chunks(d) {
        let (mean, inv) = row_stats(row, eps);
        for (j, &v) in row.iter().enumerate() {
            out.push(gain.data[j] * (v - mean) * inv + bias.data[j]);
        }
    }
    Ok(Tensor::from_parts(x.shape.clone(), out))
}

/// Mean and inverse standard deviation `1 / sqrt(var + eps)` of one row.
pub(super) fn row_stats<T: Scalar>(row: &[T], eps: T) -> (T, T) {
    let n = T::c(row.len() as f64);
    let mean = row.iter().copied().sum::<T>() / n;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, T::one() / (var + eps).sqrt())
}

/// GELU, tanh approximation:
/// `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`.
pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(gelu_scalar)
}

pub(super) fn gelu_scalar<T: Scalar>(x: T) -> T {
    let inner = T::c(GELU_SQRT_2_OVER_PI) * (x + T::c(GELU_CUBIC) * x * x * x);
    T::c(0.5) * x * (T::one() + inner.tanh())
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    a.zip_map(b, "add", |x, y| x + y)
}

/// Adds a `[d]` bias to every row of a tensor whose last extent is `d`.
pub fn add_bias<T: Scalar>(x: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let d = *x.shape.last().expect("rank >= 1");
    if bias.len() != d {
        return Err(mismatch("add_bias", &x.shape, &bias.shape));
    }
    let mut out = x.data.clone();
    for row in out.chunks_mut(d) {
        for (v, &b) in row.iter_mut().zip(&bias.data) {
            *v = *v + b;
        }
    }
    Ok(Tensor::from_parts(x.shape.clone(), out))
}

pub fn hadamard<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    a.zip_map(b, "hadamard", |x, y| x * y)
}
