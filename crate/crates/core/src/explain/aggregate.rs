use std::fmt;
use std::str::FromStr;

use super::ExplainError;
use crate::{Scalar, Tensor};

pub const DEFAULT_DISCARD: f64 = 0.99;

/// How per-head attention maps are combined into one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadAggregation {
    Average,
    Minimum,
    /// Elementwise maximum, then the lowest `fraction` of entries set to 0.
    MaxDiscard(f64),
}

impl Default for HeadAggregation {
    fn default() -> Self {
        HeadAggregation::MaxDiscard(DEFAULT_DISCARD)
    }
}

impl HeadAggregation {
    pub fn validate(&self) -> Result<(), ExplainError> {
        match *self {
            HeadAggregation::MaxDiscard(f) if !(f > 0.0 && f < 1.0) => Err(ExplainError::InvalidArgument(format!(
                "discard fraction {f} outside (0, 1)"
            ))),
            _ => Ok(()),
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            HeadAggregation::Average => "avg",
            HeadAggregation::Minimum => "min",
            HeadAggregation::MaxDiscard(_) => "max",
        }
    }
}

impl fmt::Display for HeadAggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadAggregation::MaxDiscard(d) if *d != DEFAULT_DISCARD => write!(f, "max@{d}"),
            other => f.write_str(other.short_name()),
        }
    }
}

impl FromStr for HeadAggregation {
    type Err = String;

    /// Accepts `avg`, `min`, `max` and `max@<fraction>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let agg = match s {
            "avg" | "mean" | "average" => HeadAggregation::Average,
            "min" | "minimum" => HeadAggregation::Minimum,
            "max" | "maximum" => HeadAggregation::default(),
            other => match other.strip_prefix("max@") {
                Some(f) => HeadAggregation::MaxDiscard(f.parse().map_err(|_| format!("bad discard fraction `{f}`"))?),
                None => return Err(format!("unknown head aggregation `{other}`")),
            },
        };
        agg.validate().map_err(|e| e.to_string())?;
        Ok(agg)
    }
}

/// Number of entries MaxDiscard keeps out of `total`: `ceil((1 - fraction) * total)`,
/// evaluated with a tolerance so that e.g. `(1 - 0.99) * 100` counts as exactly 1.
pub fn kept_count(fraction: f64, total: usize) -> usize {
    let exact = (1.0 - fraction) * total as f64;
    ((exact - 1e-9 * exact.max(1.0)).ceil() as usize).clamp(1, total.max(1))
}

/// Combines `[h, n, n]` attention over the head axis into `[n, n]`.
pub fn aggregate_heads<T: Scalar>(attention: &Tensor<T>, method: HeadAggregation) -> Result<Tensor<T>, ExplainError> {
    method.validate()?;
    let &[h, n, m] = attention.shape() else {
        return Err(ExplainError::InvalidArgument(format!(
            "attention must be [heads, n, n], got {:?}",
            attention.shape()
        )));
    };
    if h == 0 || n != m {
        return Err(ExplainError::InvalidArgument(format!("attention shape {:?}", attention.shape())));
    }
    let heads: Vec<&[T]> = attention.data().chunks(n * n).collect();
    let fold = |init: T, f: fn(T, T) -> T| -> Vec<T> {
        (0..n * n).map(|i| heads.iter().fold(init, |acc, head| f(acc, head[i]))).collect()
    };
    let data = match method {
        HeadAggregation::Average => {
            let inv = T::c(1.0 / h as f64);
            fold(T::zero(), |a, b| a + b).into_iter().map(|v| v * inv).collect()
        }
        HeadAggregation::Minimum => fold(T::infinity(), T::min),
        HeadAggregation::MaxDiscard(fraction) => {
            let mut max = fold(T::neg_infinity(), T::max);
            let keep = kept_count(fraction, max.len());
            let mut order: Vec<usize> = (0..max.len()).collect();
            // descending by value, first index wins ties
            order.sort_by(|&a, &b| max[b].partial_cmp(&max[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            for &i in &order[keep..] {
                max[i] = T::zero();
            }
            max
        }
    };
    Ok(Tensor::new(&[n, n], data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_heads_return_the_head() {
        let head: Vec<f64> = (0..9).map(|i| i as f64 / 9.0).collect();
        let a = Tensor::new(&[3, 3, 3], [head.clone(), head.clone(), head.clone()].concat()).unwrap();
        for m in [HeadAggregation::Average, HeadAggregation::Minimum] {
            let agg = aggregate_heads(&a, m).unwrap();
            for (x, y) in agg.data().iter().zip(&head) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn discard_keeps_one_of_a_hundred() {
        assert_eq!(kept_count(0.99, 100), 1);
        assert_eq!(kept_count(0.99, 289), 3);
        assert_eq!(kept_count(0.5, 9), 5);
        let a = Tensor::<f64>::full(&[2, 10, 10], 0.25);
        let agg = aggregate_heads(&a, HeadAggregation::MaxDiscard(0.99)).unwrap();
        let kept: Vec<usize> = (0..100).filter(|&i| agg.data()[i] != 0.0).collect();
        assert_eq!(kept, vec![0]);
    }

    #[test]
    fn parse_and_validate() {
        assert_eq!("avg".parse::<HeadAggregation>().unwrap(), HeadAggregation::Average);
        assert_eq!("max".parse::<HeadAggregation>().unwrap(), HeadAggregation::MaxDiscard(0.99));
        assert_eq!("max@0.9".parse::<HeadAggregation>().unwrap(), HeadAggregation::MaxDiscard(0.9));
        assert!("max@1".parse::<HeadAggregation>().is_err());
        assert!("median".parse::<HeadAggregation>().is_err());
        assert_eq!(HeadAggregation::MaxDiscard(0.9).to_string(), "max@0.9");
    }
}
