//! The benchmark run: sample test images, explain them, score every explanation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::seq::index;
use rayon::prelude::*;
use serde_json::json;
use vitxai::data::{DatasetManifest, Split, CLASS_NAMES};
use vitxai::explain::{explainer_for, Explainer, ExplainerKind, HeadAggregation, LimeConfig};
use vitxai::metrics::{
    avg_sensitivity_of, effective_complexity, faithfulness_correlation, ComplexityConfig, FaithfulnessConfig,
    SensitivityConfig,
};
use vitxai::rng;
use vitxai::vit::{Model, Vit};
use vitxai::Tensor;

use crate::report::{BenchReport, ImageRecord, ReportHeader};
use crate::{input_error, TOOLKIT};

/// Which class an explanation is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetMode {
    /// The model's prediction.
    #[default]
    Predicted,
    /// The image's label.
    GroundTruth,
}

impl TargetMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetMode::Predicted => "predicted",
            TargetMode::GroundTruth => "ground-truth",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSettings {
    /// Patches removed per faithfulness run; `None` means 10% of the patches.
    pub subset_size: Option<usize>,
    pub n_runs: usize,
    pub baseline: f64,
    /// Its `seed` is replaced per image.
    pub sensitivity: SensitivityConfig,
    pub complexity: ComplexityConfig,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            subset_size: None,
            n_runs: 100,
            baseline: 0.0,
            sensitivity: SensitivityConfig::default(),
            complexity: ComplexityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub manifest: PathBuf,
    pub weights: PathBuf,
    pub explainers: Vec<ExplainerKind>,
    /// Head aggregations compared for attention rollout.
    pub aggregations: Vec<HeadAggregation>,
    /// Explainer broken down by class.
    pub per_class_explainer: ExplainerKind,
    pub images_per_class: usize,
    pub seed: u64,
    pub target: TargetMode,
    /// Sample only test images the model classifies correctly.
    pub correct_only: bool,
    pub lime: LimeConfig,
    pub metrics: MetricSettings,
    pub out_dir: PathBuf,
}

pub fn default_explainers() -> Vec<ExplainerKind> {
    vec![
        ExplainerKind::TransLrp,
        ExplainerKind::Lime,
        ExplainerKind::Attention(HeadAggregation::default()),
    ]
}

pub fn default_aggregations() -> Vec<HeadAggregation> {
    vec![HeadAggregation::Average, HeadAggregation::Minimum, HeadAggregation::default()]
}

impl BenchConfig {
    pub fn new(manifest: impl Into<PathBuf>, weights: impl Into<PathBuf>, out_dir: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            manifest: manifest.into(),
            weights: weights.into(),
            explainers: default_explainers(),
            aggregations: default_aggregations(),
            per_class_explainer: ExplainerKind::TransLrp,
            images_per_class: 100,
            seed,
            target: TargetMode::Predicted,
            correct_only: false,
            lime: LimeConfig::default(),
            metrics: MetricSettings::default(),
            out_dir: out_dir.into(),
        }
    }

    /// Explainers in record order: the explainer list, then attention
    /// rollout for every aggregation not already listed.
    pub fn kinds(&self) -> Vec<ExplainerKind> {
        let mut kinds: Vec<ExplainerKind> = Vec::new();
        let extra = self.aggregations.iter().map(|&a| ExplainerKind::Attention(a));
        for k in self.explainers.iter().copied().chain(extra) {
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
        kinds
    }

    pub fn validate(&self) -> Result<()> {
        if self.explainers.is_empty() {
            return Err(input_error("at least one explainer is required"));
        }
        if self.images_per_class == 0 {
            return Err(input_error("images per class must be positive"));
        }
        if !self.explainers.contains(&self.per_class_explainer) {
            return Err(input_error(format!(
                "per-class explainer {} is not among the evaluated explainers",
                self.per_class_explainer
            )));
        }
        for a in &self.aggregations {
            a.validate().map_err(|e| input_error(e.to_string()))?;
        }
        Ok(())
    }

    fn echo(&self) -> serde_json::Value {
        let m = &self.metrics;
        json!({
            "explainers": self.explainers.iter().map(|k| k.name()).collect::<Vec<_>>(),
            "aggregations": self.aggregations.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "images_per_class": self.images_per_class,
            "target": self.target.as_str(),
            "correct_only": self.correct_only,
            "lime": {
                "n_segments": self.lime.n_segments,
                "n_samples": self.lime.n_samples,
                "top_k": self.lime.top_k,
                "kernel_width": self.lime.kernel_width,
                "ridge_alpha": self.lime.ridge_alpha,
                "baseline": self.lime.baseline,
            },
            "faithfulness": {"subset_size": m.subset_size, "n_runs": m.n_runs, "baseline": m.baseline},
            "sensitivity": {
                "radius": m.sensitivity.radius,
                "n_samples": m.sensitivity.n_samples,
                "normalize": m.sensitivity.normalize,
            },
            "complexity": {"threshold": m.complexity.threshold},
        })
    }
}

/// Faithfulness, sensitivity and complexity of one explanation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub faithfulness: f64,
    pub sensitivity: f64,
    pub complexity: f64,
}

impl Scores {
    /// `(F, S, C) = (0.12, 0.03, 0.25)`.
    pub fn triple(&self) -> String {
        let f = |v: f64| match format!("{v:.2}") {
            s if s == "-0.00" => "0.00".to_string(),
            s => s,
        };
        format!(
            "(F, S, C) = ({}, {}, {})",
            f(self.faithfulness),
            f(self.sensitivity),
            f(self.complexity)
        )
    }
}

/// Scores `attribution`, the output of `explainer` for `target` at `image`.
/// Faithfulness subsets and sensitivity noise derive from `image_seed`, so
/// explainers of the same image see the same perturbations.
#[allow(clippy::too_many_arguments)]
pub fn score_explanation(
    model: &Vit<f32>,
    explainer: &dyn Explainer<f32>,
    image: &Tensor<f32>,
    target: usize,
    attribution: &Tensor<f32>,
    explainer_seed: u64,
    image_seed: u64,
    metrics: &MetricSettings,
) -> Result<Scores> {
    let grid = model.config.grid();
    let mut faith = FaithfulnessConfig::for_grid(grid * grid, model.config.patch_size);
    if let Some(k) = metrics.subset_size {
        faith.subset_size = k;
    }
    faith.n_runs = metrics.n_runs;
    faith.baseline = metrics.baseline;
    faith.use_absolute = !explainer.kind().is_class_specific();
    faith.seed = rng::derive_seed(image_seed, &[rng::tag("faithfulness")]);
    let sens = SensitivityConfig {
        seed: rng::derive_seed(image_seed, &[rng::tag("sensitivity")]),
        ..metrics.sensitivity.clone()
    };
    Ok(Scores {
        faithfulness: faithfulness_correlation(model, image, attribution, target, &faith)?,
        sensitivity: avg_sensitivity_of(model, explainer, image, target, explainer_seed, &sens)?,
        complexity: effective_complexity(attribution, &metrics.complexity)?,
    })
}

/// Seed of everything random about the image at manifest position `index`.
pub fn image_seed(seed: u64, index: usize) -> u64 {
    rng::derive_seed(seed, &[rng::tag("image"), index as u64])
}

pub fn explainer_seed(image_seed: u64, kind: ExplainerKind) -> u64 {
    rng::derive_seed(image_seed, &[rng::tag(&kind.name())])
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: BenchReport,
    /// Number of (image, other class) pairs for which a class-agnostic
    /// explainer was re-run and produced an identical attribution.
    pub class_agnostic_checks: usize,
}

struct Sampled {
    index: usize,
    path: String,
    label: usize,
    image: Tensor<f32>,
}

fn sample_images(model: &Vit<f32>, manifest: &DatasetManifest, cfg: &BenchConfig) -> Result<Vec<Sampled>> {
    let n_classes = model.config.n_classes;
    let mut per_class: Vec<Vec<Sampled>> = (0..n_classes).map(|_| Vec::new()).collect();
    for (index, r) in manifest.records.iter().enumerate() {
        if r.split != Split::Test {
            continue;
        }
        let image = manifest.load_image::<f32>(r)?;
        per_class[r.label].push(Sampled {
            index,
            path: r.path.clone(),
            label: r.label,
            image,
        });
    }
    if cfg.correct_only {
        for pool in &mut per_class {
            let keep = pool
                .par_iter()
                .map(|s| Ok(model.predict(&s.image)? == s.label))
                .collect::<Result<Vec<bool>>>()?;
            let mut it = keep.into_iter();
            pool.retain(|_| it.next().unwrap_or(false));
        }
    }
    let short: Vec<String> = per_class
        .iter()
        .enumerate()
        .filter(|(_, p)| p.len() < cfg.images_per_class)
        .map(|(c, p)| format!("class {c} has {}", p.len()))
        .collect();
    if !short.is_empty() {
        let which = if cfg.correct_only { "correctly classified test" } else { "test" };
        return Err(input_error(format!(
            "{} images per class requested but too few {which} images are available: {}",
            cfg.images_per_class,
            short.join(", ")
        )));
    }
    let mut out = Vec::new();
    for (class, pool) in per_class.into_iter().enumerate() {
        let mut r = rng::stream(cfg.seed, &[rng::tag("sample"), class as u64]);
        let mut picked = index::sample(&mut r, pool.len(), cfg.images_per_class).into_vec();
        picked.sort_unstable();
        let mut pool: Vec<Option<Sampled>> = pool.into_iter().map(Some).collect();
        out.extend(picked.into_iter().map(|i| pool[i].take().expect("distinct indices")));
    }
    Ok(out)
}

fn class_names(n_classes: usize) -> Vec<String> {
    if n_classes == CLASS_NAMES.len() {
        CLASS_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..n_classes).map(|c| format!("class {c}")).collect()
    }
}

/// Runs the benchmark on an in-memory model.
pub fn evaluate(model: &Vit<f32>, manifest: &DatasetManifest, cfg: &BenchConfig) -> Result<EvalOutcome> {
    cfg.validate()?;
    manifest
        .validate(model.config.n_classes)
        .map_err(|e| input_error(format!("manifest {}: {e}", cfg.manifest.display())))?;
    let kinds = cfg.kinds();
    let explainers: Vec<Box<dyn Explainer<f32>>> = kinds.iter().map(|&k| explainer_for(k, &cfg.lime)).collect();
    let images = sample_images(model, manifest, cfg)?;
    let n_classes = model.config.n_classes;

    let per_image = images
        .par_iter()
        .map(|s| -> Result<(Vec<ImageRecord>, usize)> {
            let predicted = model.predict(&s.image)?;
            let target = match cfg.target {
                TargetMode::Predicted => predicted,
                TargetMode::GroundTruth => s.label,
            };
            let iseed = image_seed(cfg.seed, s.index);
            let mut records = Vec::with_capacity(explainers.len());
            let mut checks = 0;
            for explainer in &explainers {
                let kind = explainer.kind();
                let eseed = explainer_seed(iseed, kind);
                let attr = explainer
                    .explain(model, &s.image, target, eseed)
                    .with_context(|| format!("{} on {}", kind, s.path))?;
                if !kind.is_class_specific() {
                    for other in (0..n_classes).filter(|&c| c != target) {
                        let alt = explainer.explain(model, &s.image, other, eseed)?;
                        if alt.values != attr.values {
                            bail!("{kind} attribution of {} changed between targets {target} and {other}", s.path);
                        }
                        checks += 1;
                    }
                }
                let scores = score_explanation(model, explainer.as_ref(), &s.image, target, &attr.values, eseed, iseed, &cfg.metrics)
                    .with_context(|| format!("scoring {} on {}", kind, s.path))?;
                records.push(ImageRecord {
                    image: s.path.clone(),
                    index: s.index,
                    class: s.label,
                    predicted,
                    target,
                    explainer: kind.name(),
                    faithfulness: scores.faithfulness,
                    sensitivity: scores.sensitivity,
                    complexity: scores.complexity,
                });
            }
            Ok((records, checks))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut class_agnostic_checks = 0;
    for (r, c) in per_image {
        records.extend(r);
        class_agnostic_checks += c;
    }
    let header = ReportHeader {
        toolkit: TOOLKIT.to_string(),
        seed: cfg.seed,
        class_names: class_names(n_classes),
        methods: cfg.explainers.iter().map(|k| k.name()).collect(),
        per_class_method: cfg.per_class_explainer.name(),
        aggregations: cfg.aggregations.iter().map(|&a| ExplainerKind::Attention(a).name()).collect(),
        config: cfg.echo(),
    };
    Ok(EvalOutcome {
        report: BenchReport::new(header, records)?,
        class_agnostic_checks,
    })
}

/// Loads weights and manifest named by `cfg`, evaluates, and writes
/// `report.jsonl` and `tables.txt` under the output directory.
pub fn run_eval(cfg: &BenchConfig) -> Result<EvalOutcome> {
    let model = crate::load_model(&cfg.weights)?;
    let manifest = crate::load_manifest(&cfg.manifest)?;
    let outcome = evaluate(&model, &manifest, cfg)?;
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    outcome.report.save(&report_path(&cfg.out_dir))?;
    let tables = crate::tables::render_tables(&outcome.report, true);
    std::fs::write(cfg.out_dir.join("tables.txt"), &tables).context("writing tables.txt")?;
    Ok(outcome)
}

pub fn report_path(out_dir: &Path) -> PathBuf {
    out_dir.join("report.jsonl")
}
