//! Weight container.
//!
//! ```text
//! VITXAI-WEIGHTS 1
//! config image_size=32 patch_size=8 n_layers=2 n_heads=2 embed_dim=32 mlp_dim=64 n_classes=3
//! tensor patch.w f32 64,32 0 8192
//! tensor patch.b f32 32 8192 128
//! ...
//! <blank line>
//! <payload: raw little-endian values>
//! ```
//!
//! Tensor records carry `name dtype shape offset length`; offsets and lengths
//! are in bytes relative to the start of the payload. Any field or record kind
//! not listed above is rejected as belonging to a newer format version.

use std::fs;
use std::path::Path;

use super::{parameter_layout, ViTConfig, ViTWeights, VitError};
use crate::{Scalar, Tensor};

pub const WEIGHTS_MAGIC: &str = "VITXAI-WEIGHTS";
pub const WEIGHTS_VERSION: u32 = 1;

const CONFIG_KEYS: [&str; 7] = [
    "image_size",
    "patch_size",
    "n_layers",
    "n_heads",
    "embed_dim",
    "mlp_dim",
    "n_classes",
];

fn config_values(c: &ViTConfig) -> [usize; 7] {
    [
        c.image_size,
        c.patch_size,
        c.n_layers,
        c.n_heads,
        c.embed_dim,
        c.mlp_dim,
        c.n_classes,
    ]
}

pub fn encode_weights<T: Scalar>(weights: &ViTWeights<T>, config: &ViTConfig) -> Result<Vec<u8>, VitError> {
    weights.validate(config)?;
    let mut header = format!("{WEIGHTS_MAGIC} {WEIGHTS_VERSION}\nconfig");
    for (k, v) in CONFIG_KEYS.iter().zip(config_values(config)) {
        header.push_str(&format!(" {k}={v}"));
    }
    header.push('\n');
    let mut payload = Vec::with_capacity(weights.parameter_count() * T::BYTES);
    for ((name, shape), t) in parameter_layout(config).iter().zip(weights.tensors()) {
        let offset = payload.len();
        for &v in t.data() {
            v.write_le(&mut payload);
        }
        let dims: Vec<String> = shape.iter().map(|s| s.to_string()).collect();
        header.push_str(&format!(
            "tensor {name} {} {} {offset} {}\n",
            T::DTYPE,
            dims.join(","),
            payload.len() - offset
        ));
    }
    header.push('\n');
    let mut out = header.into_bytes();
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn save_weights<T: Scalar>(
    weights: &ViTWeights<T>,
    config: &ViTConfig,
    path: impl AsRef<Path>,
) -> Result<(), VitError> {
    let bytes = encode_weights(weights, config)?;
    fs::write(path.as_ref(), bytes).map_err(|e| VitError::Io(format!("{}: {e}", path.as_ref().display())))
}

pub fn load_weights<T: Scalar>(path: impl AsRef<Path>) -> Result<(ViTConfig, ViTWeights<T>), VitError> {
    let bytes =
        fs::read(path.as_ref()).map_err(|e| VitError::Io(format!("{}: {e}", path.as_ref().display())))?;
    decode_weights(&bytes)
}

struct Record {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: usize,
    length: usize,
}

fn malformed(line: usize, msg: impl Into<String>) -> VitError {
    VitError::Malformed(format!("header line {line}: {}", msg.into()))
}

fn newer(msg: impl Into<String>) -> VitError {
    VitError::UnsupportedVersion(format!(
        "{} (this reader understands format version {WEIGHTS_VERSION})",
        msg.into()
    ))
}

fn parse_usize(line: usize, what: &str, s: &str) -> Result<usize, VitError> {
    s.parse()
        .map_err(|_| malformed(line, format!("{what} `{s}` is not a non-negative integer")))
}

pub fn decode_weights<T: Scalar>(bytes: &[u8]) -> Result<(ViTConfig, ViTWeights<T>), VitError> {
    let mut lines = Vec::new();
    let mut pos = 0;
    loop {
        let Some(end) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(VitError::Malformed("header is not terminated by a blank line".into()));
        };
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| malformed(lines.len() + 1, "not valid UTF-8"))?;
        pos += end + 1;
        if line.is_empty() {
            break;
        }
        lines.push(line.to_string());
    }
    let payload = &bytes[pos..];

    let magic: Vec<&str> = lines.first().map(|l| l.split(' ').collect()).unwrap_or_default();
    match magic.as_slice() {
        [m, v] if *m == WEIGHTS_MAGIC => {
            if *v != WEIGHTS_VERSION.to_string() {
                return Err(newer(format!("file declares version {v}")));
            }
        }
        _ => return Err(malformed(1, format!("expected `{WEIGHTS_MAGIC} {WEIGHTS_VERSION}`"))),
    }

    let mut config_fields: Option<[usize; 7]> = None;
    let mut records = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(1) {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(' ').collect();
        match fields[0] {
            "config" => {
                let mut values = [None; 7];
                for kv in &fields[1..] {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| malformed(lineno, format!("`{kv}` is not key=value")))?;
                    let slot = CONFIG_KEYS
                        .iter()
                        .position(|&name| name == k)
                        .ok_or_else(|| newer(format!("unknown config field `{k}`")))?;
                    values[slot] = Some(parse_usize(lineno, k, v)?);
                }
                let mut out = [0; 7];
                for (o, (v, k)) in out.iter_mut().zip(values.iter().zip(CONFIG_KEYS)) {
                    *o = v.ok_or_else(|| malformed(lineno, format!("missing config field `{k}`")))?;
                }
                config_fields = Some(out);
            }
            "tensor" => {
                if fields.len() > 6 {
                    return Err(newer(format!("tensor record `{}` has unknown extra fields", fields[1])));
                }
                if fields.len() < 6 {
                    return Err(malformed(lineno, "tensor record needs name, dtype, shape, offset, length"));
                }
                let shape = fields[3]
                    .split(',')
                    .map(|s| parse_usize(lineno, "shape extent", s))
                    .collect::<Result<Vec<_>, _>>()?;
                records.push(Record {
                    name: fields[1].to_string(),
                    dtype: fields[2].to_string(),
                    shape,
                    offset: parse_usize(lineno, "offset", fields[4])?,
                    length: parse_usize(lineno, "length", fields[5])?,
                });
            }
            other => return Err(newer(format!("unknown header record `{other}`"))),
        }
    }
    let f = config_fields.ok_or_else(|| VitError::Malformed("missing config record".into()))?;
    let config = ViTConfig {
        image_size: f[0],
        patch_size: f[1],
        n_layers: f[2],
        n_heads: f[3],
        embed_dim: f[4],
        mlp_dim: f[5],
        n_classes: f[6],
    };
    config.validate()?;

    let layout = parameter_layout(&config);
    if layout.len() != records.len() {
        return Err(VitError::ConfigMismatch(format!(
            "config implies {} tensors, header lists {}",
            layout.len(),
            records.len()
        )));
    }
    let mut tensors = Vec::with_capacity(records.len());
    for ((name, shape), rec) in layout.iter().zip(&records) {
        if &rec.name != name || &rec.shape != shape {
            return Err(VitError::ConfigMismatch(format!(
                "expected {name} {shape:?}, found {} {:?}",
                rec.name, rec.shape
            )));
        }
        let width = match rec.dtype.as_str() {
            "f32" => 4,
            "f64" => 8,
            other => return Err(newer(format!("tensor {}: unknown dtype `{other}`", rec.name))),
        };
        let count: usize = rec.shape.iter().product();
        if rec.length != count * width {
            return Err(VitError::Malformed(format!(
                "tensor {}: length {} does not match {count} x {width} bytes",
                rec.name, rec.length
            )));
        }
        let end = rec.offset.saturating_add(rec.length);
        if end > payload.len() {
            return Err(VitError::Truncated {
                tensor: rec.name.clone(),
                needed: end,
                available: payload.len(),
            });
        }
        let raw = &payload[rec.offset..end];
        let data: Vec<T> = if width == T::BYTES && rec.dtype == T::DTYPE {
            raw.chunks_exact(width).map(T::read_le).collect()
        } else if width == 4 {
            raw.chunks_exact(4).map(|c| T::c(f32::read_le(c) as f64)).collect()
        } else {
            raw.chunks_exact(8).map(|c| T::c(f64::read_le(c))).collect()
        };
        tensors.push(Tensor::new(&rec.shape, data)?);
    }
    let weights = ViTWeights::from_ordered(&config, tensors)?;
    weights.validate(&config)?;
    Ok((config, weights))
}
