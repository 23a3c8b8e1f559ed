//! Plain-text rendering of the method, per-class and aggregation tables.

use std::fmt::Write as _;

use vitxai::explain::{ExplainerKind, HeadAggregation};

use crate::report::{BenchReport, SummaryGroup, SummaryLine};

const COLUMNS: [&str; 3] = ["Faithfulness", "Sensitivity", "Complexity"];

/// Row label of an explainer in the method table.
pub fn method_label(name: &str) -> String {
    match name.parse::<ExplainerKind>() {
        Ok(ExplainerKind::TransLrp) => "TransLRP".into(),
        Ok(ExplainerKind::Lime) => "LIME".into(),
        Ok(ExplainerKind::Attention(a)) if a == HeadAggregation::default() => "Attention".into(),
        Ok(ExplainerKind::Attention(a)) => format!("Attention ({})", aggregation_label(a)),
        Err(_) => name.into(),
    }
}

/// Row label of a head aggregation in the aggregation table.
pub fn aggregation_label(a: HeadAggregation) -> String {
    match a {
        HeadAggregation::Average => "Average".into(),
        HeadAggregation::Minimum => "Minimum".into(),
        HeadAggregation::MaxDiscard(_) if a == HeadAggregation::default() => "Maximum".into(),
        HeadAggregation::MaxDiscard(f) => format!("Maximum (discard {f})"),
    }
}

fn aggregation_row_label(name: &str) -> String {
    match name.parse::<ExplainerKind>() {
        Ok(ExplainerKind::Attention(a)) => aggregation_label(a),
        _ => name.into(),
    }
}

fn class_label(report: &BenchReport, class: usize) -> String {
    report
        .header
        .class_names
        .get(class)
        .cloned()
        .unwrap_or_else(|| format!("class {class}"))
}

fn grid(title: &str, corner: &str, rows: &[(String, &SummaryLine)]) -> String {
    let cells: Vec<[String; 3]> = rows
        .iter()
        .map(|(_, s)| [s.faithfulness.render(), s.sensitivity.render(), s.complexity.render()])
        .collect();
    let first = rows
        .iter()
        .map(|(l, _)| l.chars().count())
        .chain([corner.chars().count()])
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = (0..3)
        .map(|j| cells.iter().map(|c| c[j].chars().count()).chain([COLUMNS[j].len()]).max().unwrap_or(0))
        .collect();
    let line = |first_cell: &str, rest: [&str; 3]| {
        let mut s = format!("{first_cell:<first$}");
        for (j, v) in rest.iter().enumerate() {
            let _ = write!(s, "  {v:<w$}", w = widths[j]);
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = format!("{title}\n");
    out.push_str(&line(corner, COLUMNS));
    for ((label, _), c) in rows.iter().zip(&cells) {
        out.push_str(&line(label, [&c[0], &c[1], &c[2]]));
    }
    out
}

fn rows_of(report: &BenchReport, group: SummaryGroup) -> Vec<&SummaryLine> {
    report.summaries.iter().filter(|s| s.group == group).collect()
}

/// Explainers compared on all three metrics.
pub fn method_table(report: &BenchReport) -> String {
    let rows: Vec<(String, &SummaryLine)> = rows_of(report, SummaryGroup::Method)
        .into_iter()
        .map(|s| (method_label(&s.explainer), s))
        .collect();
    grid("Explainer comparison", "Method", &rows)
}

/// One explainer's scores by class.
pub fn class_table(report: &BenchReport) -> String {
    let rows: Vec<(String, &SummaryLine)> = rows_of(report, SummaryGroup::Class)
        .into_iter()
        .map(|s| (class_label(report, s.class.unwrap_or_default()), s))
        .collect();
    let title = format!("{} by class", method_label(&report.header.per_class_method));
    grid(&title, "Class", &rows)
}

/// Attention rollout under each head aggregation.
pub fn aggregation_table(report: &BenchReport) -> String {
    let rows: Vec<(String, &SummaryLine)> = rows_of(report, SummaryGroup::Aggregation)
        .into_iter()
        .map(|s| (aggregation_row_label(&s.explainer), s))
        .collect();
    grid("Attention head aggregation", "Aggregation", &rows)
}

/// All three tables separated by blank lines. The per-class table is left
/// out unless `per_class` is set.
pub fn render_tables(report: &BenchReport, per_class: bool) -> String {
    let mut parts = vec![method_table(report)];
    if per_class {
        parts.push(class_table(report));
    }
    parts.push(aggregation_table(report));
    parts.join("\n")
}
