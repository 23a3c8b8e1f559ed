use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
    /// Filled by [`summarize_by_class`].
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_class: BTreeMap<usize, SummaryStats>,
}

impl SummaryStats {
    pub fn render(&self) -> String {
        render(self.mean, self.std)
    }
}

pub fn summarize(values: &[f64]) -> Result<SummaryStats, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(SummaryStats {
        mean,
        std: var.sqrt(),
        count: values.len(),
        per_class: BTreeMap::new(),
    })
}

/// Overall summary with a per-label breakdown.
pub fn summarize_by_class(values: &[f64], labels: &[usize]) -> Result<SummaryStats, MetricsError> {
    if values.len() != labels.len() {
        return Err(MetricsError::Shape(format!("{} values for {} labels", values.len(), labels.len())));
    }
    let mut stats = summarize(values)?;
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&v, &l) in values.iter().zip(labels) {
        groups.entry(l).or_default().push(v);
    }
    for (label, vals) in groups {
        stats.per_class.insert(label, summarize(&vals)?);
    }
    Ok(stats)
}

/// `mean ± std` with two decimals; negative zero prints as `0.00`.
pub fn render(mean: f64, std: f64) -> String {
    let fix = |v: f64| {
        let s = format!("{v:.2}");
        if s == "-0.00" {
            "0.00".to_string()
        } else {
            s
        }
    };
    format!("{} ± {}", fix(mean), fix(std))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(render(0.16, 0.18), "0.16 ± 0.18");
        assert_eq!(render(-0.001, 0.0), "0.00 ± 0.00");
        let s = summarize(&[0.4]).unwrap();
        assert_eq!((s.mean, s.std, s.count), (0.4, 0.0, 1));
        let z = summarize(&[0.0; 4]).unwrap();
        let a = summarize(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert_eq!((z.mean, z.std), (0.0, 0.0));
        assert_eq!((a.mean, a.std), (0.0, 1.0));
        assert_eq!(summarize(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn per_class_groups() {
        let s = summarize_by_class(&[1.0, 3.0, 2.0, 2.0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.per_class[&0].std, 1.0);
        assert_eq!(s.per_class[&1].std, 0.0);
        assert!(summarize_by_class(&[1.0], &[]).is_err());
    }
}
