use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_train_fraction() -> f64 {
    0.7
}

/// Dataset manifest: where the CSV lives, which columns are categorical,
/// and which classes are hidden as unknown. Paths are resolved relative to
/// the manifest file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    /// Headered CSV with features and the label column.
    pub data: String,
    /// Optional canonical test CSV; when present, `train_fraction` is
    /// ignored and the two files define the split.
    #[serde(default)]
    pub test_data: Option<String>,
    pub label_column: String,
    /// Feature columns to one-hot encode; everything else is continuous.
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    /// Treat every feature column as categorical (fully discretized data).
    #[serde(default)]
    pub all_categorical: bool,
    pub known_classes: Vec<String>,
    pub unknown_classes: Vec<String>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Seed for the stratified split (independent from the training seed).
    #[serde(default)]
    pub split_seed: u64,
}

impl DatasetManifest {
    pub fn from_path(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read manifest {path:?}: {e}")))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("invalid manifest {path:?}: {e}")))?;
        manifest.validate()?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok((manifest, base))
    }

    pub fn validate(&self) -> Result<()> {
        if self.known_classes.is_empty() {
            return Err(Error::config(
                "known_classes is empty: hiding every class leaves nothing to learn from",
            ));
        }
        if self.unknown_classes.is_empty() {
            return Err(Error::config("unknown_classes is empty"));
        }
        if let Some(dup) = self
            .known_classes
            .iter()
            .find(|c| self.unknown_classes.contains(c))
        {
            return Err(Error::config(format!(
                "class {dup:?} is listed as both known and unknown"
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config(format!(
                "train_fraction {} must lie in (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }

    pub fn data_path(&self, base: &Path) -> PathBuf {
        base.join(&self.data)
    }

    pub fn test_data_path(&self, base: &Path) -> Option<PathBuf> {
        self.test_data.as_ref().map(|p| base.join(p))
    }
}

/// Class names to contiguous ids: known classes first, then unknown.
#[derive(Clone, Debug)]
pub struct ClassMap {
    names: Vec<String>,
    n_known: usize,
}

impl ClassMap {
    pub fn new(known: &[String], unknown: &[String]) -> Self {
        let mut names = known.to_vec();
        names.extend_from_slice(unknown);
        ClassMap {
            names,
            n_known: known.len(),
        }
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name_of(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn n_known(&self) -> usize {
        self.n_known
    }

    pub fn n_unknown(&self) -> usize {
        self.names.len() - self.n_known
    }

    pub fn n_total(&self) -> usize {
        self.names.len()
    }

    pub fn is_known(&self, id: usize) -> bool {
        id < self.n_known
    }

    /// Index of the aggregate "all unlabeled" classifier target.
    pub fn aggregate_id(&self) -> usize {
        self.n_known
    }
}
