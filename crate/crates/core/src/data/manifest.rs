use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{netpbm, DataError};
use crate::{Scalar, Tensor};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    /// Path relative to the manifest's directory, `/`-separated.
    pub path: String,
    pub label: usize,
    pub split: Split,
}

/// Ordered `(image path, label, split)` records. Serialized one record per
/// line as `relative/path.pgm,<label>,<split>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        self.records
            .iter()
            .map(|r| format!("{},{},{}\n", r.path, r.label, r.split))
            .collect()
    }

    pub fn parse(root: impl Into<PathBuf>, text: &str) -> Result<Self, DataError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| DataError::Manifest {
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = line.split(',').collect();
            let [path, label, split] = fields.as_slice() else {
                return Err(bad(format!("expected `path,label,split`, got `{line}`")));
            };
            records.push(ManifestRecord {
                path: path.to_string(),
                label: label
                    .parse()
                    .map_err(|_| bad(format!("label `{label}` is not an integer")))?,
                split: split.parse().map_err(bad)?,
            });
        }
        Ok(Self {
            root: root.into(),
            records,
        })
    }

    pub fn save(&self) -> Result<PathBuf, DataError> {
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, self.to_text()).map_err(|e| DataError::io(&path, e))?;
        Ok(path)
    }

    /// Reads a manifest; its directory becomes the root for relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(root, &text)
    }

    /// Checks labels and that every referenced file exists.
    pub fn validate(&self, n_classes: usize) -> Result<(), DataError> {
        for r in &self.records {
            if r.label >= n_classes {
                return Err(DataError::LabelOutOfRange {
                    label: r.label,
                    n_classes,
                });
            }
            let p = self.root.join(&r.path);
            if !p.is_file() {
                return Err(DataError::MissingImage(p));
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn count(&self, split: Split, label: usize) -> usize {
        self.split(split).filter(|r| r.label == label).count()
    }

    pub fn load_image<T: Scalar>(&self, record: &ManifestRecord) -> Result<Tensor<T>, DataError> {
        let p = self.root.join(&record.path);
        let bytes = fs::read(&p).map_err(|e| DataError::io(&p, e))?;
        netpbm::image_from_pgm(&bytes)
    }

    pub fn load_split<T: Scalar>(&self, split: Split) -> Result<Vec<(Tensor<T>, usize)>, DataError> {
        self.split(split)
            .map(|r| Ok((self.load_image(r)?, r.label)))
            .collect()
    }
}
