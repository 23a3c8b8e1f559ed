//! Synthetic three-class "chest phantom" images.
//!
//! Every image shows a bright body with two lung ellipses. The classes differ
//! in what appears inside the lungs:
//!
//! * `0` diffuse opacity: several broad, low-frequency bright patches;
//! * `1` clear: dark, empty lungs;
//! * `2` focal opacity: one small bright disc inside one lung.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;

use super::{netpbm, DataError, DatasetManifest, ManifestRecord, Split};
use crate::rng::{self, Rng};
use crate::Tensor;

pub const CLASS_NAMES: [&str; 3] = ["diffuse-opacity", "clear", "focal-opacity"];
pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_per_class: usize,
    pub image_size: usize,
    pub seed: u64,
    /// Half-width of the uniform pixel noise.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_per_class: 100,
            image_size: 32,
            seed: 0,
            noise: 0.04,
        }
    }
}

struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Ellipse {
    fn inside(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.cx) / self.rx;
        let dy = (y - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }
}

/// Renders one phantom of class `label` (0, 1 or 2) with values in `[0, 1]`.
pub fn render_phantom(label: usize, size: usize, noise: f64, rng: &mut Rng) -> Tensor<f64> {
    assert!(label < N_CLASSES, "label {label}");
    let s = size as f64;
    let body = rng.random_range(0.74..0.78);
    let lung_level = rng.random_range(0.17..0.21);
    let ry = rng.random_range(0.28..0.33) * s;
    let cy = s * 0.5 + rng.random_range(-0.03..0.03) * s;
    let lungs = [0.29, 0.71].map(|fx| Ellipse {
        cx: s * fx + rng.random_range(-0.025..0.025) * s,
        cy,
        rx: rng.random_range(0.12..0.15) * s,
        ry,
    });

    let mut blobs: Vec<(f64, f64, f64, f64)> = Vec::new(); // (x, y, sigma, amplitude)
    let mut disc: Option<(f64, f64, f64, f64)> = None; // (x, y, radius, level)
    match label {
        0 => {
            let count = rng.random_range(4..=6);
            for i in 0..count {
                let lung = &lungs[i % 2];
                blobs.push((
                    lung.cx + rng.random_range(-0.6..0.6) * lung.rx,
                    lung.cy + rng.random_range(-0.7..0.7) * lung.ry,
                    rng.random_range(0.09..0.12) * s,
                    rng.random_range(0.30..0.42),
                ));
            }
        }
        2 => {
            let lung = &lungs[rng.random_range(0..2)];
            let radius = rng.random_range(0.10..0.13) * s;
            disc = Some((
                lung.cx + rng.random_range(-0.3..0.3) * lung.rx,
                lung.cy + rng.random_range(-0.5..0.5) * lung.ry,
                radius,
                rng.random_range(0.85..0.95),
            ));
        }
        _ => {}
    }

    let mut out = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
            let mut v = body;
            if lungs.iter().any(|e| e.inside(x, y)) {
                v = lung_level;
                for &(bx, by, sigma, amp) in &blobs {
                    let d2 = (x - bx).powi(2) + (y - by).powi(2);
                    v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                }
                if let Some((dx, dy, radius, level)) = disc {
                    if (x - dx).powi(2) + (y - dy).powi(2) <= radius * radius {
                        v = level;
                    }
                }
            }
            v += rng.random_range(-1.0..=1.0) * noise;
            out.push(v.clamp(0.0, 1.0));
        }
    }
    Tensor::new(&[size, size], out).expect("square image")
}

/// Per-class `(train, val, test)` counts of the 65/15/20 split.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let train = n * 65 / 100;
    let val = n * 15 / 100;
    (train, val, n - train - val)
}

/// Writes `n_per_class` phantoms per class under `out_dir/images/` plus
/// `out_dir/manifest.csv`, and returns the manifest.
pub fn generate_dataset(spec: &SyntheticSpec, out_dir: impl AsRef<Path>) -> Result<DatasetManifest, DataError> {
    let out_dir = out_dir.as_ref();
    let images_dir = out_dir.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| DataError::io(&images_dir, e))?;

    let jobs: Vec<(usize, usize)> = (0..N_CLASSES)
        .flat_map(|c| (0..spec.n_per_class).map(move |i| (c, i)))
        .collect();
    let encoded: Vec<(String, Vec<u8>)> = jobs
        .par_iter()
        .map(|&(label, idx)| {
            let mut rng = rng::stream(spec.seed, &[rng::tag("phantom"), label as u64, idx as u64]);
            let img = render_phantom(label, spec.image_size, spec.noise, &mut rng);
            (format!("images/c{label}_{idx:04}.pgm"), netpbm::pgm_from_image(&img))
        })
        .collect();
    for (rel, bytes) in &encoded {
        let p = out_dir.join(rel);
        fs::write(&p, bytes).map_err(|e| DataError::io(&p, e))?;
    }

    let (n_train, n_val, _) = split_counts(spec.n_per_class);
    let mut records = Vec::with_capacity(jobs.len());
    for label in 0..N_CLASSES {
        let mut order: Vec<usize> = (0..spec.n_per_class).collect();
        let mut rng = rng::stream(spec.seed, &[rng::tag("split"), label as u64]);
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut split_of = vec![Split::Test; spec.n_per_class];
        for (rank, &idx) in order.iter().enumerate() {
            split_of[idx] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
        for (idx, split) in split_of.into_iter().enumerate() {
            records.push(ManifestRecord {
                path: format!("images/c{label}_{idx:04}.pgm"),
                label,
                split,
            });
        }
    }
    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        records,
    };
    manifest.save()?;
    Ok(manifest)
}
