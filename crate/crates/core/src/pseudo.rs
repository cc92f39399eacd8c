//! Pairwise pseudo-labels for the clustering head: for each latent vector
//! in a batch, its k most cosine-similar peers are marked as positive
//! pairs. Recomputed every mini-batch because the latent space moves.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Float;

/// Binary pairwise relation over one batch. The diagonal is zero, every row
/// has exactly `k` positives, and the relation need not be symmetric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoLabelSet {
    size: usize,
    k: usize,
    relation: Vec<bool>,
    /// Pairs whose similarity was forced to 0 by a zero-norm vector.
    pub zero_norm_pairs: usize,
}

impl PseudoLabelSet {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        self.relation[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.relation[i * self.size..(i + 1) * self.size]
    }

    /// Fraction of positive pairs whose two samples share a ground-truth
    /// class. Evaluation-only diagnostic; never feeds back into training.
    pub fn precision(&self, truth: &[usize]) -> f64 {
        debug_assert_eq!(truth.len(), self.size);
        let mut pos = 0usize;
        let mut hit = 0usize;
        for i in 0..self.size {
            for j in 0..self.size {
                if self.is_positive(i, j) {
                    pos += 1;
                    if truth[i] == truth[j] {
                        hit += 1;
                    }
                }
            }
        }
        if pos == 0 {
            0.0
        } else {
            hit as f64 / pos as f64
        }
    }
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine_similarity<F: Float>(a: &[F], b: &[F]) -> F {
    let mut dot = F::zero();
    let mut na = F::zero();
    let mut nb = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == F::zero() || nb == F::zero() {
        return F::zero();
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Marks, for every row of `z`, the `k` most cosine-similar other rows as
/// positives. Ties break toward the lower index.
pub fn assign_pseudo_labels<F: Float>(z: &Matrix<F>, k: usize) -> Result<PseudoLabelSet> {
    let b = z.rows();
    if b < 2 {
        return Err(Error::config("pseudo-labels need at least two rows"));
    }
    if k == 0 || k >= b {
        return Err(Error::config(format!(
            "pseudo-label k={k} must satisfy 1 <= k <= batch-1 ({})",
            b - 1
        )));
    }

    let norms: Vec<F> = (0..b)
        .map(|i| {
            let mut s = F::zero();
            for &v in z.row(i) {
                s += v * v;
            }
            s.sqrt()
        })
        .collect();

    let mut relation = vec![false; b * b];
    let mut zero_norm_pairs = 0usize;
    let mut sims: Vec<(F, usize)> = Vec::with_capacity(b - 1);
    for i in 0..b {
        sims.clear();
        let zi = z.row(i);
        for j in 0..b {
            if j == i {
                continue;
            }
            let s = if norms[i] == F::zero() || norms[j] == F::zero() {
                zero_norm_pairs += 1;
                F::zero()
            } else {
                let mut dot = F::zero();
                for (&x, &y) in zi.iter().zip(z.row(j)) {
                    dot += x * y;
                }
                dot / (norms[i] * norms[j])
            };
            sims.push((s, j));
        }
        // descending similarity, then ascending index
        sims.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in sims.iter().take(k) {
            relation[i * b + j] = true;
        }
    }

    Ok(PseudoLabelSet {
        size: b,
        k,
        relation,
        zero_norm_pairs,
    })
}
