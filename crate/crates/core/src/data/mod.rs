//! Tabular datasets under the novel-class-discovery protocol: labels of the
//! unknown classes are hidden from everything a trainer can touch and kept
//! only in evaluation-side fields.

pub mod loader;
pub mod manifest;
pub mod sampler;
pub mod schema;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use loader::{build_dataset, read_csv, summarize};
pub use manifest::{ClassMap, DatasetManifest};
pub use sampler::{assemble_batch, Batch, BatchSampler};
pub use schema::{ColumnKind, ColumnSchema, EncodedColumn};

use crate::matrix::Matrix;
use crate::scalar::Float;

/// Training-side view: features plus labels for known-class rows only.
/// Unknown-class rows carry `None`; their true classes live in
/// [`NcdDataset::train_truth`], which training code never receives.
#[derive(Clone, Debug)]
pub struct TrainSplit<F> {
    pub x: Matrix<F>,
    pub labels: Vec<Option<usize>>,
}

impl<F: Float> TrainSplit<F> {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|_| i))
            .collect()
    }

    pub fn unlabeled_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| if l.is_none() { Some(i) } else { None })
            .collect()
    }
}

/// Evaluation-side view with ground truth for every row.
#[derive(Clone, Debug)]
pub struct EvalSplit<F> {
    pub x: Matrix<F>,
    pub y: Vec<usize>,
}

/// A dataset realized under the NCD protocol.
#[derive(Clone, Debug)]
pub struct NcdDataset<F> {
    pub name: String,
    pub schema: ColumnSchema,
    pub classes: ClassMap,
    pub train: TrainSplit<F>,
    /// True class of every training row, evaluation only (pseudo-label
    /// precision, embedding export audit).
    pub train_truth: Vec<usize>,
    pub test: EvalSplit<F>,
    pub dropped_rows: usize,
    pub unseen_category_cells: usize,
}

impl<F: Float> NcdDataset<F> {
    /// Unknown-class test rows with truths remapped to `[0, C^u)`.
    pub fn unknown_test(&self) -> (Matrix<F>, Vec<usize>) {
        let idx: Vec<usize> = self
            .test
            .y
            .iter()
            .enumerate()
            .filter_map(|(i, &y)| (!self.classes.is_known(y)).then_some(i))
            .collect();
        let x = self.test.x.select_rows(&idx);
        let y = idx
            .iter()
            .map(|&i| self.test.y[i] - self.classes.n_known())
            .collect();
        (x, y)
    }

    /// Known-class test rows with their class ids.
    pub fn known_test(&self) -> (Matrix<F>, Vec<usize>) {
        let idx: Vec<usize> = self
            .test
            .y
            .iter()
            .enumerate()
            .filter_map(|(i, &y)| self.classes.is_known(y).then_some(i))
            .collect();
        let x = self.test.x.select_rows(&idx);
        let y = idx.iter().map(|&i| self.test.y[i]).collect();
        (x, y)
    }
}

/// Split summary written as JSON: row counts per class for each part.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitSummary {
    pub dataset: String,
    pub n_known_classes: usize,
    pub n_unknown_classes: usize,
    pub encoded_dim: usize,
    pub dropped_rows: usize,
    pub unseen_category_cells: usize,
    pub train_labeled: BTreeMap<String, usize>,
    pub train_unlabeled: BTreeMap<String, usize>,
    pub test_labeled: BTreeMap<String, usize>,
    pub test_unlabeled: BTreeMap<String, usize>,
}
