//! Benchmark harness for the `vitxai` explainers: file formats, the
//! evaluation run, report storage and table rendering.

pub mod attrfile;
pub mod cli;
pub mod eval;
pub mod heatmap;
pub mod report;
pub mod tables;

use std::path::Path;

use anyhow::Result;
use thiserror::Error;
use vitxai::data::DatasetManifest;
use vitxai::vit::{self, Vit};

pub const TOOLKIT: &str = concat!("vitxai ", env!("CARGO_PKG_VERSION"));

/// A problem with the user's input (arguments or files), reported with exit code 2.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct InputError(pub String);

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

pub fn load_model(path: &Path) -> Result<Vit<f32>> {
    if !path.is_file() {
        return Err(input_error(format!("weight file {} not found", path.display())));
    }
    let (config, weights) =
        vit::load_weights::<f32>(path).map_err(|e| input_error(format!("weight file {}: {e}", path.display())))?;
    Ok(Vit::new(config, weights)?)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    if !path.is_file() {
        return Err(input_error(format!(
            "dataset manifest {} not found (use --generate to create a synthetic dataset)",
            path.display()
        )));
    }
    DatasetManifest::load(path).map_err(|e| input_error(format!("manifest {}: {e}", path.display())))
}
