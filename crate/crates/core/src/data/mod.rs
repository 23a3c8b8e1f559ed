//! Synthetic dataset, manifests, image files and augmentation.

pub mod augment;
mod manifest;
pub mod netpbm;
pub mod synth;

pub use augment::{augment, augment_with, AugmentConfig, AugmentParams};
pub use manifest::{DatasetManifest, ManifestRecord, Split, MANIFEST_FILE};
pub use synth::{generate_dataset, render_phantom, split_counts, SyntheticSpec, CLASS_NAMES, N_CLASSES};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("image file {0} does not exist")]
    MissingImage(PathBuf),
    #[error("image: {0}")]
    Image(String),
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
