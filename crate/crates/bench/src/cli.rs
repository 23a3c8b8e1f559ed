//! Command-line interface.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use vitxai::data::{generate_dataset, netpbm, DatasetManifest, Split, SyntheticSpec};
use vitxai::explain::{explainer_for, ExplainerKind, HeadAggregation, LimeConfig};
use vitxai::metrics::{ComplexityConfig, SensitivityConfig};
use vitxai::train::{self, TrainConfig};
use vitxai::vit::{self, Model, ViTConfig};

use crate::eval::{self, BenchConfig, MetricSettings, TargetMode};
use crate::report::BenchReport;
use crate::{attrfile, heatmap, input_error, load_manifest, load_model, tables};

pub const WEIGHTS_FILE: &str = "model.vitw";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";

const EXPLAINER_NAMES: &str = "translrp, lime, attention, attention-avg, attention-min, attention-max, attention-max@<fraction>";

fn parse_explainer(s: &str) -> Result<ExplainerKind, String> {
    s.parse()
        .map_err(|e: String| format!("{e}; valid names: {EXPLAINER_NAMES}"))
}

fn parse_aggregation(s: &str) -> Result<HeadAggregation, String> {
    s.parse()
        .map_err(|e: String| format!("{e}; valid names: avg, min, max, max@<fraction>"))
}

#[derive(Debug, Parser)]
#[command(name = "vitxai", version, about = "Explain a small Vision Transformer and score the explanations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic three-class phantom dataset.
    Generate(GenerateArgs),
    /// Train a model and write its weights and epoch log.
    Train(TrainArgs),
    /// Explain one image with several explainers.
    Explain(ExplainArgs),
    /// Run the benchmark over sampled test images.
    Eval(EvalArgs),
    /// Re-render the tables of a stored report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Images per class.
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    #[arg(long, default_value_t = 32)]
    pub image_size: usize,
    /// Half-width of the uniform pixel noise.
    #[arg(long, default_value_t = 0.04)]
    pub noise: f64,
}

impl DataArgs {
    fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_per_class: self.per_class,
            image_size: self.image_size,
            seed,
            noise: self.noise,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Output directory for the weights and the log.
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset manifest [default: <out>/data/manifest.csv].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Generate the synthetic dataset next to the manifest first.
    #[arg(long)]
    pub generate: bool,
    /// Dataset seed for --generate [default: --seed].
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Random-crop padding in pixels; 0 disables the crop.
    #[arg(long, default_value_t = 4)]
    pub crop_padding: usize,
    /// Maximum rotation in degrees; 0 disables rotation.
    #[arg(long, default_value_t = 15.0)]
    pub rotation: f64,
    #[arg(long, default_value_t = 8)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 64)]
    pub mlp_dim: usize,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Patches removed per faithfulness run [default: 10% of the patches].
    #[arg(long)]
    pub subset_size: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub faithfulness_runs: usize,
    /// Pixel value of removed patches.
    #[arg(long, default_value_t = 0.0)]
    pub baseline: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sensitivity_radius: f64,
    #[arg(long, default_value_t = 10)]
    pub sensitivity_samples: usize,
    /// Report raw instead of relative explanation changes.
    #[arg(long)]
    pub no_sensitivity_normalize: bool,
    #[arg(long, default_value_t = 0.1)]
    pub complexity_threshold: f64,
    #[arg(long, default_value_t = 16)]
    pub lime_segments: usize,
    #[arg(long, default_value_t = 500)]
    pub lime_samples: usize,
    #[arg(long, default_value_t = 2)]
    pub lime_top_k: usize,
}

impl MetricArgs {
    fn settings(&self) -> MetricSettings {
        MetricSettings {
            subset_size: self.subset_size,
            n_runs: self.faithfulness_runs,
            baseline: self.baseline,
            sensitivity: SensitivityConfig {
                radius: self.sensitivity_radius,
                n_samples: self.sensitivity_samples,
                normalize: !self.no_sensitivity_normalize,
                seed: 0,
            },
            complexity: ComplexityConfig {
                threshold: self.complexity_threshold,
            },
        }
    }

    fn lime(&self) -> LimeConfig {
        LimeConfig {
            n_segments: self.lime_segments,
            n_samples: self.lime_samples,
            top_k: self.lime_top_k,
            ..LimeConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Grayscale PGM image.
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_explainer, default_value = "translrp,lime,attention")]
    pub explainers: Vec<ExplainerKind>,
    /// Class to explain [default: the predicted class].
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub metrics: MetricArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    Predicted,
    GroundTruth,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed of image sampling and every metric.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', value_parser = parse_explainer, default_value = "translrp,lime,attention")]
    pub explainers: Vec<ExplainerKind>,
    /// Head aggregations compared for attention rollout.
    #[arg(long, value_delimiter = ',', value_parser = parse_aggregation, default_value = "avg,min,max")]
    pub aggregations: Vec<HeadAggregation>,
    #[arg(long, value_parser = parse_explainer, default_value = "translrp")]
    pub per_class_explainer: ExplainerKind,
    /// Test images sampled per class.
    #[arg(long, default_value_t = 100)]
    pub images_per_class: usize,
    #[arg(long, value_enum, default_value_t = TargetArg::Predicted)]
    pub target: TargetArg,
    /// Sample only correctly classified test images.
    #[arg(long)]
    pub correct_only: bool,
    #[command(flatten)]
    pub metrics: MetricArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
    /// Also print the per-class table.
    #[arg(long)]
    pub per_class: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Explain(a) => cmd_explain(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let manifest = generate_dataset(&a.data.spec(a.seed), &a.out).context("generating dataset")?;
    println!("wrote {} images and {}", manifest.records.len(), a.out.join(vitxai::data::MANIFEST_FILE).display());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let manifest_path = a
        .manifest
        .clone()
        .unwrap_or_else(|| a.out.join("data").join(vitxai::data::MANIFEST_FILE));
    if a.generate {
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        generate_dataset(&a.data.spec(a.data_seed.unwrap_or(a.seed)), dir).context("generating dataset")?;
    }
    let manifest = load_manifest(&manifest_path)?;
    let image_size = first_image_side(&manifest)?;
    let vit_config = ViTConfig {
        image_size,
        patch_size: a.patch_size,
        n_layers: a.layers,
        n_heads: a.heads,
        embed_dim: a.embed_dim,
        mlp_dim: a.mlp_dim,
        n_classes: vitxai::data::N_CLASSES,
    };
    vit_config.validate().map_err(|e| input_error(e.to_string()))?;
    let config = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        patience: a.patience,
        crop_padding: a.crop_padding,
        rotation_degrees: a.rotation,
        seed: a.seed,
    };
    config.validate().map_err(|e| input_error(e.to_string()))?;
    let outcome = train::train::<f32>(&config, &vit_config, &manifest).map_err(|e| match e {
        train::TrainError::Data(d) => input_error(format!("dataset {}: {d}", manifest_path.display())),
        other => anyhow::Error::new(other),
    })?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let weights_path = a.out.join(WEIGHTS_FILE);
    vit::save_weights(&outcome.model.weights, &outcome.model.config, &weights_path)?;
    fs::write(a.out.join(TRAIN_LOG_FILE), outcome.log.to_jsonl()).context("writing the training log")?;
    for r in &outcome.log.epochs {
        println!(
            "epoch {:>2}  loss {:.4}  train acc {:.3}  val acc {:.3}",
            r.epoch, r.train_loss, r.train_acc, r.val_acc
        );
    }
    let test = manifest.load_split::<f32>(Split::Test)?;
    let acc = train::accuracy(&outcome.model, &test)?;
    println!(
        "best epoch {}  test acc {acc:.3}  weights {}",
        outcome.log.best_epoch().unwrap_or(0),
        weights_path.display()
    );
    Ok(())
}

fn first_image_side(manifest: &DatasetManifest) -> Result<usize> {
    let first = manifest
        .records
        .first()
        .ok_or_else(|| input_error("the dataset manifest has no records"))?;
    let img = manifest
        .load_image::<f32>(first)
        .map_err(|e| input_error(format!("{}: {e}", first.path)))?;
    let (h, w) = img.dims2();
    if h != w {
        return Err(input_error(format!("images must be square, {} is {w}x{h}", first.path)));
    }
    Ok(h)
}

fn cmd_explain(a: &ExplainArgs) -> Result<()> {
    let model = load_model(&a.weights)?;
    let bytes = fs::read(&a.image).map_err(|e| input_error(format!("image {}: {e}", a.image.display())))?;
    let image = netpbm::image_from_pgm::<f32>(&bytes).map_err(|e| input_error(format!("image {}: {e}", a.image.display())))?;
    if image.shape() != [model.config.image_size, model.config.image_size] {
        return Err(input_error(format!(
            "image {} is {:?} but the model expects {}x{}",
            a.image.display(),
            image.shape(),
            model.config.image_size,
            model.config.image_size
        )));
    }
    let predicted = model.predict(&image)?;
    let target = a.target.unwrap_or(predicted);
    if target >= model.config.n_classes {
        return Err(input_error(format!("target {target} out of range for {} classes", model.config.n_classes)));
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let stem = a.image.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let (settings, lime) = (a.metrics.settings(), a.metrics.lime());
    let iseed = eval::image_seed(a.seed, 0);
    println!("predicted class {predicted}, explaining class {target}");
    for &kind in &a.explainers {
        let explainer = explainer_for::<f32>(kind, &lime);
        let eseed = eval::explainer_seed(iseed, kind);
        let attr = explainer.explain(&model, &image, target, eseed)?;
        attrfile::save_attribution(&a.out.join(format!("{stem}.{kind}.attr")), &attr.values)?;
        fs::write(a.out.join(format!("{stem}.{kind}.ppm")), heatmap::heatmap_ppm(&image, &attr.values))
            .context("writing heatmap")?;
        let scores = eval::score_explanation(&model, explainer.as_ref(), &image, target, &attr.values, eseed, iseed, &settings)?;
        println!("{:<16} {}", kind.name(), scores.triple());
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let mut cfg = BenchConfig::new(&a.manifest, &a.weights, &a.out, a.seed);
    cfg.explainers = a.explainers.clone();
    cfg.aggregations = a.aggregations.clone();
    cfg.per_class_explainer = a.per_class_explainer;
    cfg.images_per_class = a.images_per_class;
    cfg.target = match a.target {
        TargetArg::Predicted => TargetMode::Predicted,
        TargetArg::GroundTruth => TargetMode::GroundTruth,
    };
    cfg.correct_only = a.correct_only;
    cfg.lime = a.metrics.lime();
    cfg.metrics = a.metrics.settings();
    let outcome = eval::run_eval(&cfg)?;
    print!("{}", tables::render_tables(&outcome.report, true));
    println!(
        "{} records, {} class-agnosticism checks passed, report {}",
        outcome.report.records.len(),
        outcome.class_agnostic_checks,
        eval::report_path(&a.out).display()
    );
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let report = BenchReport::load(&a.report).map_err(|e| input_error(format!("{e:#}")))?;
    print!("{}", tables::render_tables(&report, a.per_class));
    Ok(())
}
