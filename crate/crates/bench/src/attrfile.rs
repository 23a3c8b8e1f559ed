//! Attribution grid files: an ASCII header `ATTR <width> <height>\n`
//! followed by `width * height` little-endian `f32` values in row-major order.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use vitxai::Tensor;

pub const ATTR_MAGIC: &str = "ATTR";

pub fn encode_attribution(values: &Tensor<f32>) -> Vec<u8> {
    let (h, w) = values.dims2();
    let mut out = format!("{ATTR_MAGIC} {w} {h}\n").into_bytes();
    for v in values.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_attribution(bytes: &[u8]) -> Result<Tensor<f32>> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .context("attribution file has no header line")?;
    let header = std::str::from_utf8(&bytes[..nl]).context("attribution header is not ASCII")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [magic, w, h] = fields.as_slice() else {
        bail!("attribution header `{header}` should be `{ATTR_MAGIC} <width> <height>`");
    };
    if *magic != ATTR_MAGIC {
        bail!("attribution header starts with `{magic}`, expected `{ATTR_MAGIC}`");
    }
    let w: usize = w.parse().with_context(|| format!("bad width `{w}`"))?;
    let h: usize = h.parse().with_context(|| format!("bad height `{h}`"))?;
    let payload = &bytes[nl + 1..];
    if payload.len() != 4 * w * h {
        bail!("attribution payload has {} bytes, expected {} for {w}x{h}", payload.len(), 4 * w * h);
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Tensor::new(&[h, w], data)?)
}

pub fn save_attribution(path: &Path, values: &Tensor<f32>) -> Result<()> {
    fs::write(path, encode_attribution(values)).with_context(|| format!("writing {}", path.display()))
}

pub fn load_attribution(path: &Path) -> Result<Tensor<f32>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_attribution(&bytes).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let t = Tensor::from_fn(&[3, 5], |i| (i as f32 * 0.37).sin());
        let bytes = encode_attribution(&t);
        assert!(bytes.starts_with(b"ATTR 5 3\n"));
        let back = decode_attribution(&bytes).unwrap();
        assert_eq!(back.shape(), &[3, 5]);
        assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(decode_attribution(b"ATTR 2 2\n\0\0\0\0").is_err());
        assert!(decode_attribution(b"PGM 1 1\n\0\0\0\0").is_err());
        assert!(decode_attribution(b"ATTR 1\n\0\0\0\0").is_err());
    }
}
