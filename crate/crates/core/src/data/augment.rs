//! Training-time augmentation: random shift (pad then crop) and random
//! rotation, both with nearest-neighbour sampling and edge-replicating fill.

use rand::Rng as _;

use crate::rng::Rng;
use crate::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    /// Padding before the random crop; the crop offset ranges over
    /// `[-crop_padding, crop_padding]` pixels on each axis.
    pub crop_padding: usize,
    /// Rotation angle is drawn uniformly from `[-rotation_degrees, rotation_degrees]`.
    pub rotation_degrees: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            crop_padding: 4,
            rotation_degrees: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub shift_x: i64,
    pub shift_y: i64,
    pub angle_degrees: f64,
}

impl AugmentParams {
    pub const IDENTITY: Self = Self {
        shift_x: 0,
        shift_y: 0,
        angle_degrees: 0.0,
    };

    pub fn sample(rng: &mut Rng, cfg: &AugmentConfig) -> Self {
        let p = cfg.crop_padding as i64;
        let angle_degrees = if cfg.rotation_degrees > 0.0 {
            rng.random_range(-cfg.rotation_degrees..=cfg.rotation_degrees)
        } else {
            0.0
        };
        Self {
            shift_x: rng.random_range(-p..=p),
            shift_y: rng.random_range(-p..=p),
            angle_degrees,
        }
    }
}

/// Applies rotation about the image centre followed by the crop shift.
/// Output pixel `(r, c)` samples the source at the inverse-rotated position of
/// `(r + shift_y, c + shift_x)`, clamped to the image border.
pub fn augment_with<T: Scalar>(image: &Tensor<T>, params: &AugmentParams) -> Tensor<T> {
    let (h, w) = image.dims2();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let theta = params.angle_degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let y = (r as i64 + params.shift_y) as f64 - cy;
            let x = (c as i64 + params.shift_x) as f64 - cx;
            let sx = cos * x + sin * y + cx;
            let sy = -sin * x + cos * y + cy;
            let sr = (sy.round().max(0.0) as usize).min(h - 1);
            let sc = (sx.round().max(0.0) as usize).min(w - 1);
            out.push(image.data()[sr * w + sc]);
        }
    }
    Tensor::new(&[h, w], out).expect("same shape")
}

pub fn augment<T: Scalar>(image: &Tensor<T>, rng: &mut Rng, cfg: &AugmentConfig) -> Tensor<T> {
    augment_with(image, &AugmentParams::sample(rng, cfg))
}
