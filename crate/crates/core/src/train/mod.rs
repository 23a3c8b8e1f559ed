//! Minibatch training of the [`Vit`](crate::vit::Vit) classifier with Adam,
//! augmentation and early stopping on validation accuracy.

mod adam;
mod loss;

pub use adam::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use loss::cross_entropy;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{augment, AugmentConfig, DataError, DatasetManifest, Split};
use crate::rng;
use crate::vit::{self, Model, ViTConfig, ViTWeights, Vit, VitError};
use crate::{Scalar, Tensor};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("the {0} split is empty")]
    EmptySplit(Split),
    #[error("training diverged at epoch {epoch}, step {step}: loss is {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Vit(#[from] VitError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best validation accuracy before stopping.
    pub patience: usize,
    /// 0 disables the random crop.
    pub crop_padding: usize,
    /// 0 disables the random rotation.
    pub rotation_degrees: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            batch_size: 16,
            max_epochs: 15,
            patience: 5,
            crop_padding: 4,
            rotation_degrees: 15.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// A learning rate of exactly 0 is accepted as a null update.
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::InvalidConfig(msg.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max epochs must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        if !(self.rotation_degrees.is_finite() && self.rotation_degrees >= 0.0) {
            return bad("rotation degrees must be finite and non-negative");
        }
        Ok(())
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            crop_padding: self.crop_padding,
            rotation_degrees: self.rotation_degrees,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    /// Earliest epoch with the highest validation accuracy.
    pub fn best_epoch(&self) -> Option<usize> {
        let mut best: Option<&EpochRecord> = None;
        for r in &self.epochs {
            if best.is_none_or(|b| r.val_acc > b.val_acc) {
                best = Some(r);
            }
        }
        best.map(|r| r.epoch)
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let epochs = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { epochs })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Weights after the best validation epoch.
    pub model: Vit<T>,
    pub log: TrainLog,
}

pub type Example<T> = (Tensor<T>, usize);

/// Fraction of `examples` classified correctly.
pub fn accuracy<T: Scalar, M: Model<T> + ?Sized>(model: &M, examples: &[Example<T>]) -> Result<f64, VitError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let hits = examples
        .par_iter()
        .map(|(img, label)| Ok(usize::from(model.predict(img)? == *label)))
        .collect::<Result<Vec<usize>, VitError>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / examples.len() as f64)
}

/// Loads the train and validation splits of `manifest` and trains on them.
pub fn train<T: Scalar>(
    config: &TrainConfig,
    vit_config: &ViTConfig,
    manifest: &DatasetManifest,
) -> Result<TrainOutcome<T>, TrainError> {
    for split in Split::ALL {
        if manifest.split(split).next().is_none() {
            return Err(TrainError::EmptySplit(split));
        }
    }
    manifest.validate(vit_config.n_classes)?;
    let train_set = manifest.load_split::<T>(Split::Train)?;
    let val_set = manifest.load_split::<T>(Split::Val)?;
    train_on(config, vit_config, &train_set, &val_set)
}

struct BatchResult<T> {
    loss: f64,
    correct: usize,
    grads: ViTWeights<T>,
}

fn example_gradient<T: Scalar>(
    model: &Vit<T>,
    image: &Tensor<T>,
    label: usize,
    scale: T,
) -> Result<BatchResult<T>, TrainError> {
    let trace = model.forward(image)?;
    let (loss, mut dlogits) = cross_entropy(trace.logits.data(), label)?;
    for g in &mut dlogits {
        *g = *g * scale;
    }
    let grads = vit::backward(&model.weights, &model.config, &trace, &dlogits)?;
    Ok(BatchResult {
        loss: loss.to_f64_lossy(),
        correct: usize::from(trace.predicted_class() == label),
        grads: grads.weights,
    })
}

/// The freshly initialized model that training with `config` starts from.
pub fn initial_model<T: Scalar>(config: &TrainConfig, vit_config: &ViTConfig) -> Result<Vit<T>, VitError> {
    Vit::init(*vit_config, rng::derive_seed(config.seed, &[rng::tag("init")]))
}

/// Trains from [`initial_model`] on in-memory examples.
///
/// Per-example gradients are computed in parallel and reduced in batch order,
/// so results do not depend on the thread count.
pub fn train_on<T: Scalar>(
    config: &TrainConfig,
    vit_config: &ViTConfig,
    train_set: &[Example<T>],
    val_set: &[Example<T>],
) -> Result<TrainOutcome<T>, TrainError> {
    config.validate()?;
    vit_config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptySplit(Split::Train));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptySplit(Split::Val));
    }
    for &(_, label) in train_set.iter().chain(val_set) {
        if label >= vit_config.n_classes {
            return Err(TrainError::LabelOutOfRange {
                label,
                n_classes: vit_config.n_classes,
            });
        }
    }

    let mut model = initial_model(config, vit_config)?;
    let mut adam = Adam::new(&model.weights, config.learning_rate);
    let aug = config.augment_config();
    let mut log = TrainLog::default();
    let mut best: Option<(f64, ViTWeights<T>)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng::stream(config.seed, &[rng::tag("order"), epoch as u64]));
        let (mut loss_sum, mut correct) = (0.0, 0);
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let scale = T::c(1.0 / batch.len() as f64);
            let results = batch
                .par_iter()
                .map(|&i| {
                    let (img, label) = &train_set[i];
                    let mut r = rng::stream(config.seed, &[rng::tag("augment"), epoch as u64, i as u64]);
                    let img = augment(img, &mut r, &aug);
                    example_gradient(&model, &img, *label, scale)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut total = ViTWeights::zeros(vit_config);
            let mut batch_loss = 0.0;
            for r in &results {
                for (t, g) in total.tensors_mut().into_iter().zip(r.grads.tensors()) {
                    t.add_assign(g);
                }
                batch_loss += r.loss;
                correct += r.correct;
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::Divergence {
                    epoch,
                    step,
                    loss: batch_loss / batch.len() as f64,
                });
            }
            loss_sum += batch_loss;
            adam.update(&mut model.weights, &total);
        }

        let val_acc = accuracy(&model, val_set)?;
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            val_acc,
        });
        if best.as_ref().is_none_or(|(b, _)| val_acc > *b) {
            best = Some((val_acc, model.weights.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    model.weights = best.expect("at least one epoch").1;
    Ok(TrainOutcome { model, log })
}
