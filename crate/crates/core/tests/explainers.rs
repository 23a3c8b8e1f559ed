use proptest::prelude::*;

use vitxai::explain::{
    self, aggregate_heads, attention_rollout, cls_patch_scores, downsample_block_mean, kept_count, lime_explain,
    normalize_map, translrp, translrp_matrix, upsample_patch_map, ExplainError, Explainer, ExplainerKind,
    HeadAggregation, LimeConfig,
};
use vitxai::vit::{self, Model, ViTConfig, ViTWeights, Vit, VitError};
use vitxai::Tensor;

fn small_config(layers: usize, heads: usize) -> ViTConfig {
    // 4x4 image, 2x2 patches: 4 patches + CLS = 5 tokens
    ViTConfig {
        image_size: 4,
        patch_size: 2,
        n_layers: layers,
        n_heads: heads,
        embed_dim: 8,
        mlp_dim: 16,
        n_classes: 3,
    }
}

fn scaled_model(config: ViTConfig, seed: u64, gain: f64) -> Vit<f64> {
    let mut w = ViTWeights::<f64>::init(&config, seed).unwrap();
    for t in w.tensors_mut() {
        for v in t.data_mut() {
            *v *= gain;
        }
    }
    Vit::new(config, w).unwrap()
}

fn ramp(side: usize) -> Tensor<f64> {
    Tensor::from_fn(&[side, side], |i| 0.1 + 0.8 * ((i * 7919) % 97) as f64 / 97.0)
}

fn traced_with(model: &Vit<f64>, img: &Tensor<f64>, set: impl Fn(&mut Tensor<f64>)) -> vit::ForwardTrace<f64> {
    vit::forward_with_attention_hook(&model.weights, &model.config, img, &mut |_, a| set(a)).unwrap()
}

#[test]
fn identity_attention_gives_zero_rollout() {
    let model = scaled_model(small_config(2, 2), 1, 1.0);
    let trace = traced_with(&model, &ramp(4), |a| {
        let eye = Tensor::stack(&[Tensor::identity(5), Tensor::identity(5)]).unwrap();
        *a = eye;
    });
    for m in [HeadAggregation::Average, HeadAggregation::Minimum, HeadAggregation::MaxDiscard(0.99)] {
        let attr = attention_rollout(&trace, m).unwrap();
        assert!(attr.values.data().iter().all(|&v| v == 0.0), "{m}");
        assert_eq!(attr.target, None);
    }
}

#[test]
fn uniform_attention_gives_zero_rollout() {
    let model = scaled_model(small_config(1, 1), 2, 1.0);
    let trace = traced_with(&model, &ramp(4), |a| a.data_mut().fill(0.2));
    let attr = attention_rollout(&trace, HeadAggregation::Average).unwrap();
    assert_eq!(attr.values.shape(), &[4, 4]);
    assert!(attr.values.data().iter().all(|&v| v == 0.0));
}

#[test]
fn concentrated_cls_row_marks_its_patch() {
    let model = scaled_model(small_config(1, 1), 3, 1.0);
    for j in 0..4 {
        let trace = traced_with(&model, &ramp(4), |a| {
            a.data_mut().fill(0.2);
            let row = &mut a.data_mut()[..5];
            row.fill(0.0);
            row[j + 1] = 1.0;
        });
        let attr = attention_rollout(&trace, HeadAggregation::Average).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let in_block = (r / 2) * 2 + c / 2 == j;
                let v = attr.values.at(&[r, c]);
                assert_eq!(v == 1.0, in_block, "patch {j} pixel ({r},{c}) = {v}");
            }
        }
    }
}

#[test]
fn translrp_zero_gradients_and_construction_oracle() {
    let model = scaled_model(small_config(1, 2), 4, 20.0);
    let trace = model.forward(&ramp(4)).unwrap();
    let zeros = vec![Tensor::zeros(&[2, 5, 5])];
    let ones = vec![Tensor::full(&[2, 5, 5], 1.0)];
    let attr = translrp(&trace, &zeros, &ones, 0).unwrap();
    assert!(attr.values.data().iter().all(|&v| v == 0.0));

    // grad ⊙ relevance == A reduces the chain to (mean_h A + I), i.e. rollout
    // without its row normalization.
    let a = vec![trace.attention(0).clone()];
    let lrp = translrp(&trace, &a, &ones, 1).unwrap();
    let roll = attention_rollout(&trace, HeadAggregation::Average).unwrap();
    for (x, y) in lrp.values.data().iter().zip(roll.values.data()) {
        assert!((x - y).abs() < 1e-12, "{x} vs {y}");
    }
    assert_eq!(lrp.target, Some(1));
    assert!(translrp(&trace, &[], &[], 0).is_err());
}

#[test]
fn class_sensitivity() {
    let model = scaled_model(small_config(2, 2), 5, 25.0);
    let img = ramp(4);
    let roll = explain::AttentionRollout {
        aggregation: HeadAggregation::MaxDiscard(0.5),
    };
    let lrp = explain::TransLrp::default();
    let lime = explain::Lime {
        config: LimeConfig {
            n_segments: 4,
            n_samples: 200,
            top_k: 1,
            ..Default::default()
        },
    };
    let per_class = |e: &dyn Explainer<f64>| -> Vec<Tensor<f64>> {
        (0..3).map(|t| e.explain(&model, &img, t, 11).unwrap().values).collect()
    };
    let r = per_class(&roll);
    assert!(r[0] == r[1] && r[1] == r[2]);
    let t = per_class(&lrp);
    assert!(t[0] != t[1] || t[1] != t[2]);
    let l = per_class(&lime);
    assert!(l[0] != l[1] || l[1] != l[2]);
    assert_eq!(Explainer::<f64>::kind(&lime), ExplainerKind::Lime);
}

/// Logit of class `c` is `sum_s coef[c][s] * [segment s is unmasked]`.
struct Planted {
    side: usize,
    grid: usize,
    coef: Vec<Vec<f64>>,
}

impl Model<f64> for Planted {
    fn n_classes(&self) -> usize {
        self.coef.len()
    }

    fn logits(&self, image: &Tensor<f64>) -> Result<Vec<f64>, VitError> {
        let segs = explain::grid_segments(self.side, self.grid);
        let mut on = vec![false; self.grid * self.grid];
        for (&v, &s) in image.data().iter().zip(&segs) {
            on[s] |= v != 0.0;
        }
        Ok(self
            .coef
            .iter()
            .map(|c| c.iter().zip(&on).map(|(w, &b)| if b { *w } else { 0.0 }).sum())
            .collect())
    }
}

#[test]
fn lime_recovers_planted_top_segments() {
    let mut c0 = vec![0.1; 16];
    c0[5] = 3.0;
    c0[10] = 2.0;
    c0[3] = -4.0;
    c0[12] = 1.5;
    let mut c1 = vec![-0.2; 16];
    c1[0] = 1.0;
    c1[15] = 0.9;
    let model = Planted {
        side: 32,
        grid: 4,
        coef: vec![c0, c1],
    };
    let img = Tensor::full(&[32, 32], 0.5);
    let cfg = LimeConfig::default();
    let fit = explain::lime_fit(&model, &img, 0, &cfg, 3).unwrap();
    assert_eq!(fit.top_positive(2), vec![5, 10]);
    let attr = lime_explain(&model, &img, 0, &cfg, 3).unwrap();
    assert!(attr.binary);
    let segs = explain::grid_segments(32, 4);
    for (v, s) in attr.values.data().iter().zip(&segs) {
        assert_eq!(*v, if *s == 5 || *s == 10 { 1.0 } else { 0.0 });
    }
    let ones = attr.values.data().iter().filter(|&&v| v == 1.0).count();
    assert_eq!(ones, 2 * 64);
    assert_eq!(lime_explain(&model, &img, 0, &cfg, 3).unwrap(), attr);

    let other = explain::lime_fit(&model, &img, 1, &cfg, 3).unwrap();
    assert_eq!(other.top_positive(2), vec![0, 15]);
    // a single positive coefficient yields a single segment
    let bare = Planted {
        side: 32,
        grid: 4,
        coef: vec![(0..16).map(|s| if s == 7 { 1.0 } else { -1.0 }).collect()],
    };
    let attr = lime_explain(&bare, &img, 0, &cfg, 1).unwrap();
    assert_eq!(attr.values.data().iter().filter(|&&v| v == 1.0).count(), 64);
}

#[test]
fn lime_resamples_degenerate_designs() {
    let model = Planted {
        side: 32,
        grid: 32,
        coef: vec![vec![1.0; 1024]],
    };
    let img = Tensor::full(&[32, 32], 0.5);
    let cfg = LimeConfig {
        n_segments: 1024,
        n_samples: 10,
        ..Default::default()
    };
    let outcomes: Vec<_> = (0..40).map(|seed| explain::lime_fit(&model, &img, 0, &cfg, seed)).collect();
    assert!(outcomes.iter().any(|o| matches!(o, Ok(f) if f.attempts > 1)));
    assert!(outcomes
        .iter()
        .any(|o| matches!(o, Err(ExplainError::DegenerateDesign { attempts: 3, .. }))));
}

#[test]
fn lime_preconditions() {
    let model = Planted {
        side: 32,
        grid: 4,
        coef: vec![vec![1.0; 16]],
    };
    let img = Tensor::full(&[32, 32], 0.5);
    for cfg in [
        LimeConfig { n_samples: 9, ..Default::default() },
        LimeConfig { top_k: 17, ..Default::default() },
        LimeConfig { n_segments: 15, ..Default::default() },
        LimeConfig { n_segments: 9, ..Default::default() },
    ] {
        assert!(matches!(lime_explain(&model, &img, 0, &cfg, 0), Err(ExplainError::InvalidArgument(_))));
    }
    assert!(matches!(
        lime_explain(&model, &img, 1, &LimeConfig::default(), 0),
        Err(ExplainError::TargetOutOfRange { .. })
    ));
}

fn attention_strategy() -> impl Strategy<Value = Tensor<f64>> {
    (1usize..4, 2usize..7).prop_flat_map(|(h, n)| {
        proptest::collection::vec(0.0f64..1.0, h * n * n).prop_map(move |d| Tensor::new(&[h, n, n], d).unwrap())
    })
}

proptest! {
    #[test]
    fn aggregation_order_statistics(a in attention_strategy()) {
        let lo = aggregate_heads(&a, HeadAggregation::Minimum).unwrap();
        let mid = aggregate_heads(&a, HeadAggregation::Average).unwrap();
        let n = lo.shape()[0];
        let h = a.shape()[0];
        for i in 0..n * n {
            let hi = (0..h).map(|k| a.data()[k * n * n + i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo.data()[i] <= mid.data()[i] + 1e-15);
            prop_assert!(mid.data()[i] <= hi + 1e-15);
        }
    }

    #[test]
    fn max_discard_cardinality(a in attention_strategy(), fraction in 0.01f64..0.99) {
        let n = a.shape()[1];
        let agg = aggregate_heads(&a.map(|v| v + 1e-3), HeadAggregation::MaxDiscard(fraction)).unwrap();
        let nonzero = agg.data().iter().filter(|&&v| v != 0.0).count();
        prop_assert_eq!(nonzero, kept_count(fraction, n * n));
        prop_assert_eq!(nonzero, (((1.0 - fraction) * (n * n) as f64) - 1e-9).ceil().max(1.0) as usize);
    }

    #[test]
    fn translrp_raw_scores_are_non_negative(g in attention_strategy(), seed in 0u64..1000) {
        let g = g.map(|v| v - 0.5);
        let layers = 1 + (seed % 3) as usize;
        let grads = vec![g.clone(); layers];
        let rel: Vec<Tensor<f64>> = (0..layers).map(|l| g.map(|v| (v * (l as f64 + 1.7)).sin())).collect();
        let m = translrp_matrix(&grads, &rel).unwrap();
        prop_assert!(m.data().iter().all(|&v| v >= 0.0));
        if let Ok(scores) = cls_patch_scores(&m) {
            prop_assert!(scores.data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn normalization_range(data in proptest::collection::vec(-5.0f64..5.0, 16)) {
        let raw = Tensor::new(&[4, 4], data).unwrap();
        let n = normalize_map(&raw);
        prop_assert!(n.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let lo = n.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = n.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((lo == 0.0 && hi == 1.0) || n.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn upsample_then_block_mean_round_trips(g in 1usize..5, block in 1usize..5, seed in 0u64..1000) {
        let grid = Tensor::from_fn(&[g, g], |i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0);
        let up = upsample_patch_map(&grid, g * block).unwrap();
        let down = downsample_block_mean(&up, block).unwrap();
        for (a, b) in down.data().iter().zip(grid.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
