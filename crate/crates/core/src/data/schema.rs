use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

/// One source column and where it landed in the encoded matrix.
#[derive(Clone, Debug)]
pub struct EncodedColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// Observed categories in fitted order; empty for continuous columns.
    pub categories: Vec<String>,
    pub span: Range<usize>,
}

/// Per-column metadata for an encoded feature matrix: which encoded columns
/// are continuous and how categorical one-hot groups are laid out. Spans
/// are disjoint and cover the encoded matrix exactly.
#[derive(Clone, Debug)]
pub struct ColumnSchema {
    columns: Vec<EncodedColumn>,
    encoded_dim: usize,
    continuous_dims: Vec<usize>,
    categorical_spans: Vec<Range<usize>>,
}

impl ColumnSchema {
    pub fn new(columns: Vec<EncodedColumn>) -> Result<Self> {
        let mut cursor = 0usize;
        let mut continuous_dims = Vec::new();
        let mut categorical_spans = Vec::new();
        for col in &columns {
            if col.span.start != cursor {
                return Err(Error::config(format!(
                    "column {} span does not start at {cursor}",
                    col.name
                )));
            }
            match col.kind {
                ColumnKind::Continuous => {
                    if col.span.len() != 1 {
                        return Err(Error::config(format!(
                            "continuous column {} must span one encoded column",
                            col.name
                        )));
                    }
                    continuous_dims.push(col.span.start);
                }
                ColumnKind::Categorical => {
                    if col.categories.len() < 2 {
                        return Err(Error::data(format!(
                            "categorical column {} has cardinality {} (< 2)",
                            col.name,
                            col.categories.len()
                        )));
                    }
                    if col.span.len() != col.categories.len() {
                        return Err(Error::config(format!(
                            "categorical column {} span does not match cardinality",
                            col.name
                        )));
                    }
                    categorical_spans.push(col.span.clone());
                }
            }
            cursor = col.span.end;
        }
        Ok(ColumnSchema {
            columns,
            encoded_dim: cursor,
            continuous_dims,
            categorical_spans,
        })
    }

    /// Schema describing `d` plain continuous columns (synthetic data).
    pub fn all_continuous(d: usize) -> Self {
        let columns = (0..d)
            .map(|i| EncodedColumn {
                name: format!("x{i}"),
                kind: ColumnKind::Continuous,
                categories: Vec::new(),
                span: i..i + 1,
            })
            .collect();
        ColumnSchema::new(columns).expect("all-continuous schema is valid")
    }

    pub fn encoded_dim(&self) -> usize {
        self.encoded_dim
    }

    pub fn columns(&self) -> &[EncodedColumn] {
        &self.columns
    }

    /// Encoded column indices holding continuous values.
    pub fn continuous_dims(&self) -> &[usize] {
        &self.continuous_dims
    }

    /// Encoded spans of categorical one-hot groups.
    pub fn categorical_spans(&self) -> &[Range<usize>] {
        &self.categorical_spans
    }
}
