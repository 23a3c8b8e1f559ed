//! Binary PGM (P5) and PPM (P6) with maxval 255, via the `image` crate.

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use super::DataError;
use crate::{Scalar, Tensor};

fn encode(width: usize, height: usize, samples: &[u8], subtype: PnmSubtype, color: ExtendedColorType) -> Vec<u8> {
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_subtype(subtype)
        .write_image(samples, width as u32, height as u32, color)
        .expect("in-memory netpbm encoding");
    out
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel count");
    encode(width, height, pixels, PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8)
}

/// `rgb` holds interleaved red, green, blue bytes.
pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), 3 * width * height, "pixel count");
    encode(width, height, rgb, PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netpbm {
    pub width: usize,
    pub height: usize,
    /// Samples per pixel: 1 for PGM, 3 for PPM.
    pub channels: usize,
    pub samples: Vec<u8>,
}

/// Decodes an 8-bit grayscale or RGB netpbm file.
pub fn decode_netpbm(bytes: &[u8]) -> Result<Netpbm, DataError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm).map_err(|e| DataError::Image(e.to_string()))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let (channels, samples) = match img {
        DynamicImage::ImageLuma8(g) => (1, g.into_raw()),
        DynamicImage::ImageRgb8(c) => (3, c.into_raw()),
        other => {
            return Err(DataError::Image(format!(
                "unsupported netpbm sample type {:?}, expected 8-bit samples",
                other.color()
            )))
        }
    };
    Ok(Netpbm {
        width,
        height,
        channels,
        samples,
    })
}

/// Quantizes `[0, 1]` intensities to bytes (values are clamped first).
pub fn quantize<T: Scalar>(image: &Tensor<T>) -> Vec<u8> {
    image
        .data()
        .iter()
        .map(|&v| (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

pub fn dequantize<T: Scalar>(width: usize, height: usize, samples: &[u8]) -> Tensor<T> {
    Tensor::from_fn(&[height, width], |i| T::c(samples[i] as f64 / 255.0))
}

pub fn pgm_from_image<T: Scalar>(image: &Tensor<T>) -> Vec<u8> {
    let (h, w) = image.dims2();
    encode_pgm(w, h, &quantize(image))
}

pub fn image_from_pgm<T: Scalar>(bytes: &[u8]) -> Result<Tensor<T>, DataError> {
    let img = decode_netpbm(bytes)?;
    if img.channels != 1 {
        return Err(DataError::Image("expected a grayscale (P5) image".into()));
    }
    Ok(dequantize(img.width, img.height, &img.samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout_and_round_trip() {
        let pixels: Vec<u8> = (0..12).map(|i| i * 20).collect();
        let bytes = encode_pgm(4, 3, &pixels);
        assert!(bytes.starts_with(b"P5"));
        assert!(bytes.ends_with(&pixels));
        let back = decode_netpbm(&bytes).unwrap();
        assert_eq!((back.width, back.height, back.channels), (4, 3, 1));
        assert_eq!(back.samples, pixels);
    }

    #[test]
    fn ppm_round_trip_and_comments() {
        let rgb: Vec<u8> = (0..18).collect();
        let back = decode_netpbm(&encode_ppm(3, 2, &rgb)).unwrap();
        assert_eq!((back.channels, back.samples), (3, rgb));
        let mut bytes = b"P6 # rgb\n2 1\n# max\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        assert_eq!(decode_netpbm(&bytes).unwrap().samples, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(decode_netpbm(b"P9\n1 1\n255\n0").is_err());
        assert!(decode_netpbm(b"P5\n2 2\n255\n\x00\x01").is_err());
        assert!(image_from_pgm::<f64>(&encode_ppm(1, 1, &[1, 2, 3])).is_err());
    }

    #[test]
    fn quantization_round_trips_bytes() {
        let pixels: Vec<u8> = (0..=255).collect();
        let img: Tensor<f32> = dequantize(16, 16, &pixels);
        assert_eq!(quantize(&img), pixels);
        let t = image_from_pgm::<f64>(&pgm_from_image(&img)).unwrap();
        assert_eq!(quantize(&t), pixels);
    }
}
