//! Grayscale image with the attribution blended into the red channel.

use vitxai::data::netpbm;
use vitxai::{Scalar, Tensor};

/// For pixel intensity `g` and attribution `a`: red `g + (1 - g) a`,
/// green and blue `g (1 - a)`. Red minus green equals `a`.
pub fn blend_rgb<T: Scalar>(image: &Tensor<T>, attribution: &Tensor<T>) -> Vec<f64> {
    assert_eq!(image.shape(), attribution.shape(), "heatmap shapes");
    let mut rgb = Vec::with_capacity(3 * image.len());
    for (g, a) in image.data().iter().zip(attribution.data()) {
        let g = g.to_f64_lossy().clamp(0.0, 1.0);
        let a = a.to_f64_lossy().clamp(0.0, 1.0);
        let rest = g * (1.0 - a);
        rgb.extend_from_slice(&[g + (1.0 - g) * a, rest, rest]);
    }
    rgb
}

pub fn heatmap_ppm<T: Scalar>(image: &Tensor<T>, attribution: &Tensor<T>) -> Vec<u8> {
    let (h, w) = image.dims2();
    let bytes: Vec<u8> = blend_rgb(image, attribution)
        .into_iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    netpbm::encode_ppm(w, h, &bytes)
}
