//! CSV ingestion and the NCD split protocol.
//!
//! Rows with missing values (empty fields or `?`) are dropped and counted.
//! Continuous columns are min-max scaled to [0, 1] using training-split
//! statistics only; categorical columns are one-hot encoded with categories
//! fitted on the training split (an unseen category at test time encodes as
//! all-zeros and is counted). Unknown-class rows keep their labels only in
//! the evaluation-side structures.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;

use crate::data::manifest::{ClassMap, DatasetManifest};
use crate::data::schema::{ColumnKind, ColumnSchema, EncodedColumn};
use crate::data::{EvalSplit, NcdDataset, SplitSummary, TrainSplit};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::seeded;
use crate::scalar::Float;

/// Raw string table read from a headered CSV, label column separated out.
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub labels: Vec<String>,
    pub dropped_rows: usize,
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field == "?"
}

/// Reads a headered CSV, splitting off the label column and dropping rows
/// with missing values.
pub fn read_csv(path: &Path, label_column: &str) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::data(format!("cannot open {path:?}: {e}")))?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            Error::config(format!(
                "label column {label_column:?} not found in {path:?}"
            ))
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dropped_rows = 0usize;
    for record in reader.records() {
        let record = record?;
        if record.len() != headers.len() {
            dropped_rows += 1;
            continue;
        }
        if record.iter().any(is_missing) {
            dropped_rows += 1;
            continue;
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                labels.push(field.to_string());
            } else {
                row.push(field.to_string());
            }
        }
        rows.push(row);
    }
    if dropped_rows > 0 {
        warn!("{path:?}: dropped {dropped_rows} rows with missing values");
    }
    if rows.is_empty() {
        return Err(Error::data(format!("{path:?} has no usable rows")));
    }
    Ok(RawTable {
        feature_names,
        rows,
        labels,
        dropped_rows,
    })
}

/// Fitted feature encoder: per-column statistics from the training split.
struct FittedEncoder {
    schema: ColumnSchema,
    /// (min, max) per source column for continuous ones.
    ranges: Vec<Option<(f64, f64)>>,
}

impl FittedEncoder {
    fn fit(
        table: &RawTable,
        train_rows: &[usize],
        categorical: &[String],
        all_categorical: bool,
    ) -> Result<Self> {
        let mut columns = Vec::with_capacity(table.feature_names.len());
        let mut ranges = Vec::with_capacity(table.feature_names.len());
        let mut cursor = 0usize;
        for (c, name) in table.feature_names.iter().enumerate() {
            if all_categorical || categorical.iter().any(|n| n == name) {
                let mut cats: Vec<String> = train_rows
                    .iter()
                    .map(|&r| table.rows[r][c].clone())
                    .collect();
                cats.sort();
                cats.dedup();
                let span = cursor..cursor + cats.len();
                cursor = span.end;
                columns.push(EncodedColumn {
                    name: name.clone(),
                    kind: ColumnKind::Categorical,
                    categories: cats,
                    span,
                });
                ranges.push(None);
            } else {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for &r in train_rows {
                    let v: f64 = parse_finite(name, &table.rows[r][c])?;
                    min = min.min(v);
                    max = max.max(v);
                }
                let span = cursor..cursor + 1;
                cursor = span.end;
                columns.push(EncodedColumn {
                    name: name.clone(),
                    kind: ColumnKind::Continuous,
                    categories: Vec::new(),
                    span,
                });
                ranges.push(Some((min, max)));
            }
        }
        Ok(FittedEncoder {
            schema: ColumnSchema::new(columns)?,
            ranges,
        })
    }

    /// Encodes rows. Training rows land exactly in [0, 1]; test rows are
    /// clamped to [-0.05, 1.05]. Returns the matrix and the number of
    /// unseen-category cells zeroed out.
    fn encode<F: Float>(
        &self,
        table: &RawTable,
        rows: &[usize],
        is_test: bool,
    ) -> Result<(Matrix<F>, usize)> {
        let mut out = Matrix::zeros(rows.len(), self.schema.encoded_dim());
        let mut unseen = 0usize;
        for (r_out, &r) in rows.iter().enumerate() {
            let row = out.row_mut(r_out);
            for (c, col) in self.schema.columns().iter().enumerate() {
                let field = &table.rows[r][c];
                match col.kind {
                    ColumnKind::Continuous => {
                        let v: f64 = parse_finite(&col.name, field)?;
                        let (min, max) = self.ranges[c].expect("continuous column has range");
                        let scaled = if max > min { (v - min) / (max - min) } else { 0.0 };
                        let scaled = if is_test {
                            scaled.clamp(-0.05, 1.05)
                        } else {
                            scaled
                        };
                        row[col.span.start] = F::c(scaled);
                    }
                    ColumnKind::Categorical => {
                        match col.categories.iter().position(|cat| cat == field) {
                            Some(k) => row[col.span.start + k] = F::one(),
                            None => {
                                // unseen at test time: all-zeros group
                                unseen += 1;
                            }
                        }
                    }
                }
            }
        }
        if unseen > 0 {
            warn!("{unseen} cells had categories unseen in training; encoded as all-zeros");
        }
        Ok((out, unseen))
    }
}

fn parse_finite(column: &str, field: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| {
        Error::data(format!(
            "column {column:?} declared continuous but value {field:?} is not numeric"
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::data(format!(
            "column {column:?} holds non-finite value {field:?}"
        )));
    }
    Ok(v)
}

/// Stratified train/test row split with largest-remainder allocation, so
/// the train side totals `round(n * fraction)` while staying proportional
/// per class. Every class needs at least 2 rows (one on each side).
fn stratified_split(
    labels: &[String],
    classes: &ClassMap,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes.n_total()];
    for (r, label) in labels.iter().enumerate() {
        let id = classes
            .id_of(label)
            .ok_or_else(|| Error::data(format!("label {label:?} not declared in manifest")))?;
        per_class[id].push(r);
    }
    for (id, rows) in per_class.iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::data(format!(
                "class {:?} has {} row(s); stratified split needs at least 2",
                classes.name_of(id),
                rows.len()
            )));
        }
    }

    let n: usize = per_class.iter().map(|r| r.len()).sum();
    let target: usize = ((n as f64) * train_fraction).round() as usize;
    let mut quota: Vec<usize> = Vec::with_capacity(per_class.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(per_class.len());
    for (id, rows) in per_class.iter().enumerate() {
        let exact = rows.len() as f64 * train_fraction;
        let base = (exact.floor() as usize).clamp(1, rows.len() - 1);
        quota.push(base);
        remainders.push((exact - base as f64, id));
    }
    let mut allocated: usize = quota.iter().sum();
    // hand out the leftover seats by largest remainder, lowest id first
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, id) in &remainders {
        if allocated >= target {
            break;
        }
        if quota[id] < per_class[id].len() - 1 {
            quota[id] += 1;
            allocated += 1;
        }
    }

    let mut rng = seeded(seed, "split");
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (id, mut rows) in per_class.into_iter().enumerate() {
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..quota[id]]);
        test.extend_from_slice(&rows[quota[id]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn class_ids(labels: &[String], rows: &[usize], classes: &ClassMap) -> Result<Vec<usize>> {
    rows.iter()
        .map(|&r| {
            classes
                .id_of(&labels[r])
                .ok_or_else(|| Error::data(format!("label {:?} not declared in manifest", labels[r])))
        })
        .collect()
}

/// Realizes the full NCD protocol for a manifest: read, split, hide the
/// unknown-class labels, fit the encoder on training rows, and encode.
pub fn build_dataset<F: Float>(
    manifest: &DatasetManifest,
    base_dir: &Path,
) -> Result<NcdDataset<F>> {
    manifest.validate()?;
    let classes = ClassMap::new(&manifest.known_classes, &manifest.unknown_classes);

    let table = read_csv(&manifest.data_path(base_dir), &manifest.label_column)?;
    let mut dropped = table.dropped_rows;

    // Canonical test file, or a stratified split of the single file.
    let (train_table, train_rows, test_table, test_rows) = match manifest.test_data_path(base_dir)
    {
        Some(test_path) => {
            let test = read_csv(&test_path, &manifest.label_column)?;
            if test.feature_names != table.feature_names {
                return Err(Error::data(
                    "train and test files have different feature columns",
                ));
            }
            dropped += test.dropped_rows;
            let train_rows: Vec<usize> = (0..table.rows.len()).collect();
            let test_rows: Vec<usize> = (0..test.rows.len()).collect();
            (table, train_rows, Some(test), test_rows)
        }
        None => {
            let (train_rows, test_rows) = stratified_split(
                &table.labels,
                &classes,
                manifest.train_fraction,
                manifest.split_seed,
            )?;
            (table, train_rows, None, test_rows)
        }
    };

    let encoder = FittedEncoder::fit(
        &train_table,
        &train_rows,
        &manifest.categorical_columns,
        manifest.all_categorical,
    )?;
    let (train_x, _) = encoder.encode::<F>(&train_table, &train_rows, false)?;
    let test_ref: &RawTable = test_table.as_ref().unwrap_or(&train_table);
    let (test_x, unseen) = encoder.encode::<F>(test_ref, &test_rows, true)?;

    let train_truth = class_ids(&train_table.labels, &train_rows, &classes)?;
    let test_truth = class_ids(&test_ref.labels, &test_rows, &classes)?;

    // Hide unknown-class labels on the training side.
    let labels: Vec<Option<usize>> = train_truth
        .iter()
        .map(|&id| if classes.is_known(id) { Some(id) } else { None })
        .collect();

    Ok(NcdDataset {
        name: manifest.name.clone(),
        schema: encoder.schema,
        classes,
        train: TrainSplit {
            x: train_x,
            labels,
        },
        train_truth,
        test: EvalSplit {
            x: test_x,
            y: test_truth,
        },
        dropped_rows: dropped,
        unseen_category_cells: unseen,
    })
}

/// Per-class row counts for each of the four protocol parts.
pub fn summarize<F: Float>(ds: &NcdDataset<F>) -> SplitSummary {
    let mut summary = SplitSummary {
        dataset: ds.name.clone(),
        n_known_classes: ds.classes.n_known(),
        n_unknown_classes: ds.classes.n_unknown(),
        encoded_dim: ds.schema.encoded_dim(),
        dropped_rows: ds.dropped_rows,
        unseen_category_cells: ds.unseen_category_cells,
        train_labeled: BTreeMap::new(),
        train_unlabeled: BTreeMap::new(),
        test_labeled: BTreeMap::new(),
        test_unlabeled: BTreeMap::new(),
    };
    for &id in &ds.train_truth {
        let name = ds.classes.name_of(id).to_string();
        let bucket = if ds.classes.is_known(id) {
            &mut summary.train_labeled
        } else {
            &mut summary.train_unlabeled
        };
        *bucket.entry(name).or_insert(0) += 1;
    }
    for &id in &ds.test.y {
        let name = ds.classes.name_of(id).to_string();
        let bucket = if ds.classes.is_known(id) {
            &mut summary.test_labeled
        } else {
            &mut summary.test_unlabeled
        };
        *bucket.entry(name).or_insert(0) += 1;
    }
    summary
}
