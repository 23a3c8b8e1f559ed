//! Line-delimited benchmark reports.
//!
//! A report is one JSON object per line: a header, then one record per
//! (image, explainer) pair, then the summaries derived from those records.
//! Loading recomputes every summary and rejects the file if any stored value
//! drifts from the recomputation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vitxai::metrics::{summarize, summarize_by_class, SummaryStats};

/// Allowed drift between stored and recomputed summaries.
pub const SUMMARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub toolkit: String,
    pub seed: u64,
    pub class_names: Vec<String>,
    /// Explainer names for the method table, in row order.
    pub methods: Vec<String>,
    /// Explainer whose scores are broken down by class.
    pub per_class_method: String,
    /// Attention explainer names for the aggregation table, in row order.
    pub aggregations: Vec<String>,
    pub config: serde_json::Value,
}

/// Scores of one explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    /// Manifest path of the image.
    pub image: String,
    /// Position of the image in the manifest.
    pub index: usize,
    pub class: usize,
    pub predicted: usize,
    /// Class the explanation was computed for.
    pub target: usize,
    pub explainer: String,
    pub faithfulness: f64,
    pub sensitivity: f64,
    pub complexity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum SummaryGroup {
    Method,
    Class,
    Aggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub group: SummaryGroup,
    pub explainer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
    pub faithfulness: SummaryStats,
    pub sensitivity: SummaryStats,
    pub complexity: SummaryStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(ReportHeader),
    Record(ImageRecord),
    Summary(SummaryLine),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub header: ReportHeader,
    pub records: Vec<ImageRecord>,
    pub summaries: Vec<SummaryLine>,
}

pub const METRICS: [&str; 3] = ["faithfulness", "sensitivity", "complexity"];

fn metric_columns(records: &[&ImageRecord]) -> [Vec<f64>; 3] {
    [
        records.iter().map(|r| r.faithfulness).collect(),
        records.iter().map(|r| r.sensitivity).collect(),
        records.iter().map(|r| r.complexity).collect(),
    ]
}

fn summary_line(group: SummaryGroup, explainer: &str, class: Option<usize>, records: &[&ImageRecord]) -> Result<SummaryLine> {
    if records.is_empty() {
        bail!("no records for explainer `{explainer}`");
    }
    let [f, s, c] = metric_columns(records);
    Ok(SummaryLine {
        group,
        explainer: explainer.to_string(),
        class,
        faithfulness: summarize(&f)?,
        sensitivity: summarize(&s)?,
        complexity: summarize(&c)?,
    })
}

/// Method, per-class and aggregation summaries of `records`, in that order.
pub fn compute_summaries(header: &ReportHeader, records: &[ImageRecord]) -> Result<Vec<SummaryLine>> {
    let of = |name: &str| -> Vec<&ImageRecord> { records.iter().filter(|r| r.explainer == name).collect() };
    let mut out = Vec::new();
    for m in &header.methods {
        out.push(summary_line(SummaryGroup::Method, m, None, &of(m))?);
    }
    let chosen = of(&header.per_class_method);
    if !header.per_class_method.is_empty() {
        let labels: Vec<usize> = chosen.iter().map(|r| r.class).collect();
        let [f, s, c] = metric_columns(&chosen);
        let (f, s, c) = (
            summarize_by_class(&f, &labels)?,
            summarize_by_class(&s, &labels)?,
            summarize_by_class(&c, &labels)?,
        );
        for class in f.per_class.keys() {
            out.push(SummaryLine {
                group: SummaryGroup::Class,
                explainer: header.per_class_method.clone(),
                class: Some(*class),
                faithfulness: f.per_class[class].clone(),
                sensitivity: s.per_class[class].clone(),
                complexity: c.per_class[class].clone(),
            });
        }
    }
    for a in &header.aggregations {
        out.push(summary_line(SummaryGroup::Aggregation, a, None, &of(a))?);
    }
    Ok(out)
}

impl BenchReport {
    pub fn new(header: ReportHeader, records: Vec<ImageRecord>) -> Result<Self> {
        let summaries = compute_summaries(&header, &records)?;
        Ok(Self {
            header,
            records,
            summaries,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: Line| {
            out.push_str(&serde_json::to_string(&line).expect("report lines serialize"));
            out.push('\n');
        };
        push(Line::Header(self.header.clone()));
        for r in &self.records {
            push(Line::Record(r.clone()));
        }
        for s in &self.summaries {
            push(Line::Summary(s.clone()));
        }
        out
    }

    /// Parses a report and verifies its summaries against its records.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        let mut summaries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: Line = serde_json::from_str(raw).with_context(|| format!("report line {}", i + 1))?;
            match line {
                Line::Header(h) if header.is_none() && records.is_empty() => header = Some(h),
                Line::Header(_) => bail!("report line {}: unexpected second header", i + 1),
                Line::Record(r) => records.push(r),
                Line::Summary(s) => summaries.push(s),
            }
        }
        let header = header.context("report has no header line")?;
        check_records(&records)?;
        let report = Self {
            summaries: compute_summaries(&header, &records).context("recomputing summaries")?,
            header,
            records,
        };
        check_summaries(&summaries, &report.summaries)?;
        Ok(report)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_jsonl(&text).with_context(|| format!("invalid report {}", path.display()))
    }

    pub fn summary(&self, group: SummaryGroup, explainer: &str, class: Option<usize>) -> Option<&SummaryLine> {
        self.summaries
            .iter()
            .find(|s| s.group == group && s.explainer == explainer && s.class == class)
    }

    /// Records grouped by explainer name.
    pub fn by_explainer(&self) -> BTreeMap<&str, Vec<&ImageRecord>> {
        let mut map: BTreeMap<&str, Vec<&ImageRecord>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.explainer.as_str()).or_default().push(r);
        }
        map
    }
}

fn check_records(records: &[ImageRecord]) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        let bad = |field: &str, v: f64| format!("record {} ({} / {}): {field} = {v} is out of range", i + 1, r.image, r.explainer);
        if !(-1.0..=1.0).contains(&r.faithfulness) {
            bail!(bad("faithfulness", r.faithfulness));
        }
        if !(r.sensitivity >= 0.0 && r.sensitivity.is_finite()) {
            bail!(bad("sensitivity", r.sensitivity));
        }
        if !(0.0..=1.0).contains(&r.complexity) {
            bail!(bad("complexity", r.complexity));
        }
    }
    Ok(())
}

fn check_stats(label: &str, stored: &SummaryStats, fresh: &SummaryStats) -> Result<()> {
    for (field, a, b) in [("mean", stored.mean, fresh.mean), ("std", stored.std, fresh.std)] {
        let close = (a - b).abs() <= SUMMARY_TOLERANCE;
        if !close {
            bail!("summary {label}.{field}: stored {a} but records give {b}");
        }
    }
    if stored.count != fresh.count {
        bail!("summary {label}.count: stored {} but records give {}", stored.count, fresh.count);
    }
    Ok(())
}

fn check_summaries(stored: &[SummaryLine], fresh: &[SummaryLine]) -> Result<()> {
    if stored.len() != fresh.len() {
        bail!("report stores {} summaries but its records give {}", stored.len(), fresh.len());
    }
    for (s, f) in stored.iter().zip(fresh) {
        if (s.group, &s.explainer, s.class) != (f.group, &f.explainer, f.class) {
            bail!(
                "summary for {:?} {} (class {:?}) where {:?} {} (class {:?}) was expected",
                s.group,
                s.explainer,
                s.class,
                f.group,
                f.explainer,
                f.class
            );
        }
        let who = match s.class {
            Some(c) => format!("{:?}/{}/class {c}", s.group, s.explainer),
            None => format!("{:?}/{}", s.group, s.explainer),
        }
        .to_lowercase();
        check_stats(&format!("{who}/faithfulness"), &s.faithfulness, &f.faithfulness)?;
        check_stats(&format!("{who}/sensitivity"), &s.sensitivity, &f.sensitivity)?;
        check_stats(&format!("{who}/complexity"), &s.complexity, &f.complexity)?;
    }
    Ok(())
}
