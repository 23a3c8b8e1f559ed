use super::TrainError;
use crate::Scalar;

/// Softmax cross-entropy of `logits` against `label`.
/// Returns `(-log softmax(logits)[label], softmax(logits) - onehot(label))`.
pub fn cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>), TrainError> {
    if label >= logits.len() {
        return Err(TrainError::LabelOutOfRange {
            label,
            n_classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let loss = total.ln() - (logits[label] - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(c, &e)| e / total - if c == label { T::one() } else { T::zero() })
        .collect();
    Ok((loss, grad))
}
