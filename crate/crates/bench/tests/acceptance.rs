//! Acceptance run: one PASS/FAIL line per criterion, then a single assertion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use vitxai::data::{generate_dataset, DatasetManifest, Split, SyntheticSpec};
use vitxai::explain::{
    aggregate_heads, cls_patch_scores, kept_count, rollout_matrix, translrp_matrix, Attribution, ExplainError,
    Explainer, ExplainerKind, HeadAggregation, LimeConfig,
};
use vitxai::metrics::{
    avg_sensitivity_of, effective_complexity, faithfulness_correlation, pearson, ComplexityConfig, FaithfulnessConfig,
    SensitivityConfig,
};
use vitxai::tensor::gradcheck::{
    check_op_record, finite_difference, max_relative_error, max_relative_error_with_floor, SCALE_FLOOR,
};
use vitxai::tensor::{add_bias, add_bias_backward, OpRecord};
use vitxai::train::{self, TrainConfig};
use vitxai::vit::{self, Model, ViTConfig, ViTWeights, Vit, VitError, DEFAULT_LRP_EPS};
use vitxai::Tensor;
use vitxai_bench::eval::{evaluate, BenchConfig, EvalOutcome};
use vitxai_bench::report::BenchReport;

const GRADIENT_TOLERANCE: f64 = 1e-4;
const GRADIENT_BUDGET_SECS: f64 = 60.0;
const ORACLE_TOLERANCE: f64 = 0.05;
const PLANTED_TOLERANCE: f64 = 0.01;
const MIN_TEST_ACCURACY: f64 = 0.90;
const MAX_EPOCHS: usize = 15;
const TRAIN_BUDGET_SECS: f64 = 600.0;
const TREND_FRACTION: f64 = 0.95;

type Check = Result<String, String>;

fn run(name: &str, results: &mut Vec<(String, bool)>, f: impl FnOnce() -> Check) {
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let (pass, detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    results.push((name.to_string(), pass));
}

fn lcg_tensor(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor<f64> {
    let mut s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
    Tensor::from_fn(shape, |_| {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        lo + (hi - lo) * ((s >> 11) as f64 / (1u64 << 53) as f64)
    })
}

// gradient fidelity

fn toy(layers: usize, heads: usize, seed: u64, gain: f64) -> Vit<f64> {
    let config = ViTConfig {
        image_size: 8,
        patch_size: 4,
        n_layers: layers,
        n_heads: heads,
        embed_dim: 8,
        mlp_dim: 16,
        n_classes: 3,
    };
    let mut weights = ViTWeights::<f64>::init(&config, seed).unwrap();
    for (i, t) in weights.tensors_mut().into_iter().enumerate() {
        let noise = lcg_tensor(t.shape(), seed * 131 + i as u64, -0.1, 0.1);
        for (v, n) in t.data_mut().iter_mut().zip(noise.data()) {
            *v = *v * gain + n;
        }
    }
    Vit::new(config, weights).unwrap()
}

fn attention_error(model: &Vit<f64>, img: &Tensor<f64>, target: usize) -> f64 {
    let trace = model.forward(img).unwrap();
    let grads = model.attention_gradients(&trace, target).unwrap();
    let mut worst: f64 = 0.0;
    for (l, grad) in grads.iter().enumerate() {
        let logit_at = |values: &[f64]| {
            vit::forward_with_attention_hook(&model.weights, &model.config, img, &mut |layer, a| {
                if layer == l {
                    a.data_mut().copy_from_slice(values);
                }
            })
            .unwrap()
            .logits
            .data()[target]
        };
        let numeric = finite_difference(logit_at, trace.attention(l).data(), 1e-5);
        worst = worst.max(max_relative_error(grad.data(), &numeric));
    }
    worst
}

fn weight_error(model: &Vit<f64>, img: &Tensor<f64>) -> f64 {
    let trace = model.forward(img).unwrap();
    let upstream = [0.3, -1.2, 0.7];
    let grads = vit::backward(&model.weights, &model.config, &trace, &upstream).unwrap();
    let numeric: Vec<Vec<f64>> = (0..model.weights.tensors().len())
        .map(|slot| {
            let loss = |values: &[f64]| {
                let mut w = model.weights.clone();
                w.tensors_mut()[slot].data_mut().copy_from_slice(values);
                let t = vit::forward(&w, &model.config, img).unwrap();
                t.logits.data().iter().zip(upstream).map(|(a, b)| a * b).sum()
            };
            finite_difference(loss, model.weights.tensors()[slot].data(), 1e-5)
        })
        .collect();
    let global = numeric.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    grads
        .weights
        .tensors()
        .into_iter()
        .zip(&numeric)
        .map(|(a, n)| max_relative_error_with_floor(a.data(), n, SCALE_FLOOR * global))
        .fold(0.0, f64::max)
}

fn op_error() -> f64 {
    let r = |shape: &[usize], seed| lcg_tensor(shape, seed, -1.0, 1.0);
    let records = vec![
        OpRecord::Matmul { a: r(&[3, 4], 1), b: r(&[4, 2], 2) },
        OpRecord::Softmax { x: r(&[3, 5], 3), axis: 1 },
        OpRecord::Softmax { x: r(&[3, 5], 4), axis: 0 },
        OpRecord::LayerNorm { x: r(&[3, 6], 5), gain: r(&[6], 6), bias: r(&[6], 7), eps: 1e-5 },
        OpRecord::Gelu { x: r(&[2, 7], 8).scale(3.0) },
        OpRecord::Add { a: r(&[2, 3], 9), b: r(&[2, 3], 10) },
        OpRecord::Hadamard { a: r(&[2, 3], 11), b: r(&[2, 3], 12) },
    ];
    let mut worst = records
        .iter()
        .map(|rec| check_op_record(rec, &r(rec.forward().unwrap().shape(), 99), 1e-5))
        .fold(0.0, f64::max);
    let (x, b, up) = (r(&[3, 4], 13), r(&[4], 14), r(&[3, 4], 15));
    let (gx, gb) = add_bias_backward(&up);
    let loss_x = |v: &[f64]| {
        let t = Tensor::new(&[3, 4], v.to_vec()).unwrap();
        add_bias(&t, &b).unwrap().data().iter().zip(up.data()).map(|(a, u)| a * u).sum()
    };
    let loss_b = |v: &[f64]| {
        let t = Tensor::new(&[4], v.to_vec()).unwrap();
        add_bias(&x, &t).unwrap().data().iter().zip(up.data()).map(|(a, u)| a * u).sum()
    };
    worst = worst.max(max_relative_error(gx.data(), &finite_difference(loss_x, x.data(), 1e-5)));
    worst.max(max_relative_error(gb.data(), &finite_difference(loss_b, b.data(), 1e-5)))
}

fn gradient_fidelity() -> Check {
    let start = Instant::now();
    let mut worst: f64 = op_error();
    for (layers, heads) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let attn = toy(layers, heads, 5 + layers as u64 + heads as u64, 25.0);
        let img = lcg_tensor(&[8, 8], 9 + layers as u64, 0.0, 1.0);
        for target in 0..3 {
            worst = worst.max(attention_error(&attn, &img, target));
        }
        let w = toy(layers, heads, 3 + layers as u64, 12.0);
        worst = worst.max(weight_error(&w, &lcg_tensor(&[8, 8], 4, 0.0, 1.0)));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "max relative error {worst:.2e} (< {GRADIENT_TOLERANCE:.0e}) over ops, attention maps and weights of 1- and 2-layer toys; {secs:.1} s (< {GRADIENT_BUDGET_SECS} s)"
    );
    if worst < GRADIENT_TOLERANCE && secs < GRADIENT_BUDGET_SECS {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// metric oracles

struct PatchModel<F> {
    patch: usize,
    gw: usize,
    f: F,
}

impl<F: Fn(&[bool]) -> f64 + Sync> Model<f64> for PatchModel<F> {
    fn n_classes(&self) -> usize {
        1
    }

    fn logits(&self, image: &Tensor<f64>) -> Result<Vec<f64>, VitError> {
        let (h, w) = image.dims2();
        let mut intact = vec![false; (h / self.patch) * self.gw];
        for (i, &v) in image.data().iter().enumerate() {
            if v != 0.0 {
                intact[(i / w / self.patch) * self.gw + (i % w) / self.patch] = true;
            }
        }
        Ok(vec![(self.f)(&intact)])
    }
}

fn per_patch_map(values: &[f64], gh: usize, gw: usize, patch: usize) -> Tensor<f64> {
    Tensor::from_fn(&[gh * patch, gw * patch], |i| {
        let (r, c) = (i / (gw * patch), i % (gw * patch));
        values[(r / patch) * gw + c / patch]
    })
}

fn faith_cfg(subset: usize, runs: usize, patch: usize, seed: u64) -> FaithfulnessConfig {
    FaithfulnessConfig {
        subset_size: subset,
        n_runs: runs,
        baseline: 0.0,
        patch_size: patch,
        use_absolute: false,
        seed,
    }
}

fn metric_oracles() -> Check {
    let f = |on: &[bool]| {
        let x: Vec<f64> = on.iter().map(|&b| f64::from(u8::from(b))).collect();
        (0.9 * x[0] + 0.2 * x[1] - 0.4 * x[2] + 1.3 * x[3] * x[4] + 0.5 * x[5]).tanh() + 0.7 * x[1] * x[5]
    };
    let model = PatchModel { patch: 2, gw: 3, f };
    let per_patch = [0.3, 0.9, 0.0, 0.2, 0.7, 0.1];
    let attr = per_patch_map(&per_patch, 2, 3, 2);
    let full = f(&[true; 6]);
    let (mut d, mut a) = (Vec::new(), Vec::new());
    for i in 0..6 {
        for j in i + 1..6 {
            let mut on = [true; 6];
            on[i] = false;
            on[j] = false;
            d.push(full - f(&on));
            a.push((per_patch[i] + per_patch[j]) * 4.0);
        }
    }
    let exact = pearson(&d, &a);
    let sampled = faithfulness_correlation(&model, &Tensor::full(&[4, 6], 0.5), &attr, 0, &faith_cfg(2, 5000, 2, 9))
        .map_err(|e| e.to_string())?;

    let w: Vec<f64> = (0..16).map(|i| ((i * 37) % 11) as f64 / 10.0 + 0.05).collect();
    let wc = w.clone();
    let planted = PatchModel {
        patch: 8,
        gw: 4,
        f: move |on: &[bool]| on.iter().zip(&wc).map(|(&b, w)| if b { *w } else { 0.0 }).sum(),
    };
    let r = faithfulness_correlation(&planted, &Tensor::full(&[32, 32], 0.6), &per_patch_map(&w, 4, 4, 8), 0, &faith_cfg(2, 100, 8, 1))
        .map_err(|e| e.to_string())?;
    let detail = format!(
        "6-patch toy sampled {sampled:.4} vs exhaustive {exact:.4} (|diff| {:.4} < {ORACLE_TOLERANCE}); planted additive model {r:.4} (1 ± {PLANTED_TOLERANCE})",
        (sampled - exact).abs()
    );
    if (sampled - exact).abs() < ORACLE_TOLERANCE && (r - 1.0).abs() <= PLANTED_TOLERANCE {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// degenerate calibration

struct ConstantExplainer(f32);

impl Explainer<f32> for ConstantExplainer {
    fn kind(&self) -> ExplainerKind {
        ExplainerKind::TransLrp
    }

    fn explain(&self, _: &Vit<f32>, image: &Tensor<f32>, target: usize, _: u64) -> Result<Attribution<f32>, ExplainError> {
        Ok(Attribution::from_raw(&Tensor::full(image.shape(), self.0), ExplainerKind::TransLrp, Some(target)))
    }
}

fn degenerate_calibration(model: &Vit<f32>, test: &[(Tensor<f32>, usize)]) -> Check {
    let explainer = ConstantExplainer(0.6);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let grid = model.config.grid();
    for (i, (img, _)) in test.iter().take(10).enumerate() {
        let target = model.predict(img).map_err(|e| e.to_string())?;
        let attr = explainer.explain(model, img, target, 0).map_err(|e| e.to_string())?;
        let mut fc = FaithfulnessConfig::for_grid(grid * grid, model.config.patch_size);
        fc.seed = i as u64;
        let faith = faithfulness_correlation(model, img, &attr.values, target, &fc).map_err(|e| e.to_string())?;
        let sens = avg_sensitivity_of(model, &explainer, img, target, 0, &SensitivityConfig { seed: i as u64, ..Default::default() })
            .map_err(|e| e.to_string())?;
        let zero = Tensor::<f32>::zeros(img.shape());
        let cx = effective_complexity(&zero, &ComplexityConfig::default()).map_err(|e| e.to_string())?;
        worst = (worst.0.max(faith.abs()), worst.1.max(sens), worst.2.max(cx));
    }
    let detail = format!(
        "constant explainer on 10 test images: max |faithfulness| {}, max sensitivity {}; all-zero attribution complexity {}",
        worst.0, worst.1, worst.2
    );
    if worst == (0.0, 0.0, 0.0) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// training

fn training_competence(dir: &Path) -> Result<(Check, Option<(Vit<f32>, DatasetManifest)>), String> {
    let manifest = generate_dataset(&SyntheticSpec::default(), dir).map_err(|e| e.to_string())?;
    let config = TrainConfig::default();
    let start = Instant::now();
    let outcome = train::train::<f32>(&config, &ViTConfig::default(), &manifest).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let test = manifest.load_split::<f32>(Split::Test).map_err(|e| e.to_string())?;
    let acc = train::accuracy(&outcome.model, &test).map_err(|e| e.to_string())?;
    let epochs = outcome.log.epochs.len();
    let detail = format!(
        "default synthetic run (100 images/class): test accuracy {acc:.3} (>= {MIN_TEST_ACCURACY}) after {epochs} epochs (<= {MAX_EPOCHS}), {secs:.1} s (< {TRAIN_BUDGET_SECS} s)"
    );
    let pass = acc >= MIN_TEST_ACCURACY && epochs <= MAX_EPOCHS && config.max_epochs <= MAX_EPOCHS && secs < TRAIN_BUDGET_SECS;
    Ok((if pass { Ok(detail) } else { Err(detail) }, Some((outcome.model, manifest))))
}

// evaluation-based checks

fn table3_trend(outcome: &EvalOutcome) -> Check {
    let by = outcome.report.by_explainer();
    let (avg, max) = (&by["attention-avg"], &by["attention-max"]);
    let wins = avg
        .iter()
        .zip(max.iter())
        .filter(|(a, m)| {
            assert_eq!(a.index, m.index);
            a.complexity > m.complexity
        })
        .count();
    let frac = wins as f64 / avg.len() as f64;
    let mean = |rs: &[&vitxai_bench::report::ImageRecord]| rs.iter().map(|r| r.complexity).sum::<f64>() / rs.len() as f64;
    let detail = format!(
        "Average complexity > MaxDiscard(0.99) complexity on {wins}/{} images ({:.1}% >= {:.0}%); means {:.2} vs {:.2}",
        avg.len(),
        100.0 * frac,
        100.0 * TREND_FRACTION,
        mean(avg),
        mean(max)
    );
    if frac >= TREND_FRACTION {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn class_agnosticism(outcome: &EvalOutcome, cfg: &BenchConfig, n_classes: usize) -> Check {
    let attention_kinds = cfg
        .kinds()
        .iter()
        .filter(|k| !k.is_class_specific())
        .count();
    let images = cfg.images_per_class * n_classes;
    let expected = attention_kinds * images * (n_classes - 1);
    let detail = format!(
        "{} of {expected} (image, explainer, other class) rollout comparisons identical over the full evaluation run ({images} images)",
        outcome.class_agnostic_checks
    );
    if outcome.class_agnostic_checks == expected && expected > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn invariants(model: &Vit<f32>, test: &[(Tensor<f32>, usize)], report: &BenchReport, dir: &Path) -> Check {
    let mut notes = Vec::new();

    // attention stochasticity
    let mut worst_row: f64 = 0.0;
    for (img, _) in test {
        let trace = model.forward(img).map_err(|e| e.to_string())?;
        for a in trace.attentions() {
            let n = a.shape()[2];
            for row in a.data().chunks(n) {
                if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err("attention entry outside [0, 1]".into());
                }
                worst_row = worst_row.max((row.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs());
            }
        }
    }
    if worst_row > 1e-5 {
        return Err(format!("attention row sums deviate from 1 by {worst_row:.2e}"));
    }
    notes.push(format!("attention rows sum to 1 within {worst_row:.1e}"));

    // rollout identity chain
    for layers in 1..=4 {
        for method in [HeadAggregation::Average, HeadAggregation::Minimum, HeadAggregation::default()] {
            let eye = Tensor::stack(&[Tensor::<f64>::identity(17), Tensor::identity(17)]).map_err(|e| e.to_string())?;
            let product = rollout_matrix(&vec![eye; layers], method).map_err(|e| e.to_string())?;
            if product != Tensor::identity(17) {
                return Err(format!("{layers}-layer identity rollout with {method} is not I"));
            }
        }
    }
    notes.push("identity rollout chains give I exactly".into());

    // TransLRP raw non-negativity
    let mut min_raw = f64::INFINITY;
    for (img, _) in test {
        let trace = model.forward(img).map_err(|e| e.to_string())?;
        for target in 0..model.config.n_classes {
            let grads = model.attention_gradients(&trace, target).map_err(|e| e.to_string())?;
            let rels = model.lrp_relevances(&trace, target, DEFAULT_LRP_EPS as f32).map_err(|e| e.to_string())?;
            let product = translrp_matrix(&grads, &rels.attention).map_err(|e| e.to_string())?;
            let raw = cls_patch_scores(&product).map_err(|e| e.to_string())?;
            let m = product.data().iter().chain(raw.data()).fold(f32::INFINITY, |m, &v| m.min(v));
            min_raw = min_raw.min(m as f64);
        }
    }
    if min_raw < 0.0 {
        return Err(format!("negative raw TransLRP value {min_raw}"));
    }
    notes.push("raw TransLRP values >= 0".into());

    // MaxDiscard cardinality, against integer arithmetic
    for (percent, n) in [(99u64, 10usize), (99, 17), (90, 17), (50, 5), (75, 7)] {
        let a = lcg_tensor(&[2, n, n], percent * 1000 + n as u64, 0.01, 1.0);
        let agg = aggregate_heads(&a, HeadAggregation::MaxDiscard(percent as f64 / 100.0)).map_err(|e| e.to_string())?;
        let nonzero = agg.data().iter().filter(|&&v| v != 0.0).count();
        let expected = ((100 - percent) as usize * n * n).div_ceil(100);
        if nonzero != expected || kept_count(percent as f64 / 100.0, n * n) != expected {
            return Err(format!("MaxDiscard({percent}%) on {n}x{n} kept {nonzero}, expected {expected}"));
        }
    }
    notes.push("MaxDiscard keeps ceil((1-f) n^2) entries".into());

    // metric ranges
    for r in &report.records {
        let ok = (-1.0..=1.0).contains(&r.faithfulness) && r.sensitivity >= 0.0 && (0.0..=1.0).contains(&r.complexity);
        // class-agnostic explainers report the absolute correlation
        let abs_ok = !r.explainer.starts_with("attention") || r.faithfulness >= 0.0;
        if !ok || !abs_ok {
            return Err(format!("record out of range: {r:?}"));
        }
    }
    notes.push(format!("{} records within metric ranges", report.records.len()));

    // round trips
    let bytes = vit::encode_weights(&model.weights, &model.config).map_err(|e| e.to_string())?;
    let (cfg, weights) = vit::decode_weights::<f32>(&bytes).map_err(|e| e.to_string())?;
    let bit_equal = weights
        .tensors()
        .iter()
        .zip(model.weights.tensors())
        .all(|(a, b)| a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    if cfg != model.config || !bit_equal {
        return Err("weight file round trip changed the model".into());
    }
    let text = report.to_jsonl();
    let back = BenchReport::from_jsonl(&text).map_err(|e| format!("{e:#}"))?;
    if &back != report || back.to_jsonl() != text {
        return Err("report round trip changed the report".into());
    }
    notes.push("weight and report round trips are exact".into());

    // end-to-end byte determinism
    let runs: Vec<(Vec<Vec<u8>>, Vec<u8>, String)> = (0..2)
        .map(|k| {
            let root = dir.join(format!("determinism{k}"));
            let spec = SyntheticSpec { n_per_class: 10, seed: 5, ..Default::default() };
            let manifest = generate_dataset(&spec, &root).unwrap();
            let files: Vec<Vec<u8>> = manifest
                .records
                .iter()
                .map(|r| std::fs::read(root.join(&r.path)).unwrap())
                .chain([std::fs::read(root.join("manifest.csv")).unwrap()])
                .collect();
            let config = TrainConfig { max_epochs: 2, seed: 6, ..Default::default() };
            let out = train::train::<f32>(&config, &ViTConfig::default(), &manifest).unwrap();
            let weights = vit::encode_weights(&out.model.weights, &out.model.config).unwrap();
            let mut cfg = BenchConfig::new(root.join("manifest.csv"), "unused", &root, 8);
            cfg.images_per_class = 2;
            cfg.lime = LimeConfig { n_samples: 100, ..Default::default() };
            let report = evaluate(&out.model, &manifest, &cfg).unwrap().report.to_jsonl();
            (files, weights, report)
        })
        .collect();
    if runs[0] != runs[1] {
        return Err("repeated dataset, training and evaluation runs differ".into());
    }
    notes.push("dataset, weights and report bytes reproduce under fixed seeds".into());

    Ok(notes.join("; "))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let mut results = Vec::new();

    run("gradient fidelity", &mut results, gradient_fidelity);
    run("metric oracle equivalence", &mut results, metric_oracles);

    let mut trained = None;
    run("training competence", &mut results, || {
        let (check, model) = training_competence(&dir.path().join("data"))?;
        trained = model;
        check
    });

    let Some((model, manifest)) = trained else {
        for name in [
            "degenerate-explainer calibration",
            "head-aggregation complexity trend",
            "class-agnosticism of rollout",
            "invariant suites",
        ] {
            println!("FAIL {name}: no trained model");
            results.push((name.to_string(), false));
        }
        finish(results);
        return;
    };
    let test = manifest.load_split::<f32>(Split::Test).unwrap();
    run("degenerate-explainer calibration", &mut results, || degenerate_calibration(&model, &test));

    let n_classes = model.config.n_classes;
    let mut cfg = BenchConfig::new(dir.path().join("data/manifest.csv"), "in-memory", dir.path().join("eval"), 0);
    cfg.images_per_class = (0..n_classes).map(|c| manifest.count(Split::Test, c)).min().unwrap_or(0);
    let outcome = evaluate(&model, &manifest, &cfg);
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            for name in ["head-aggregation complexity trend", "class-agnosticism of rollout", "invariant suites"] {
                println!("FAIL {name}: evaluation failed: {e:#}");
                results.push((name.to_string(), false));
            }
            finish(results);
            return;
        }
    };
    run("head-aggregation complexity trend", &mut results, || table3_trend(&outcome));
    run("class-agnosticism of rollout", &mut results, || class_agnosticism(&outcome, &cfg, n_classes));
    run("invariant suites", &mut results, || invariants(&model, &test, &outcome.report, dir.path()));
    finish(results);
}

fn finish(mut results: Vec<(String, bool)>) {
    let substitutes_pass = results.iter().all(|(_, p)| *p);
    println!(
        "{} absolute table values and reference test accuracy: not reproducible without the original data and pretrained model; covered by the property checks above",
        if substitutes_pass { "PASS" } else { "FAIL" }
    );
    results.push(("not reproducible as stated".into(), substitutes_pass));
    let failed: Vec<&str> = results.iter().filter(|(_, p)| !p).map(|(n, _)| n.as_str()).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
