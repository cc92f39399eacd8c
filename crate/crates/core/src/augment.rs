//! SMOTE-NC perturbation for the consistency regularization terms.
//!
//! A perturbed counterpart of `x` is built from one of its k nearest pool
//! rows: continuous dimensions interpolate toward the chosen neighbor with
//! a single lambda ~ U(0,1) per sample; categorical one-hot groups take the
//! majority category among the k neighbors, ties resolving to x's own
//! category. Not used for oversampling, only as a perturbation generator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::ColumnSchema;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Float;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub k_neighbors: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { k_neighbors: 5 }
    }
}

/// Indices of the `k` pool rows nearest to `x` (Euclidean over continuous
/// dims only), excluding `exclude` (the sample itself when it belongs to
/// the pool). Distance ties break toward the lower pool index.
pub fn k_nearest<F: Float>(
    x: &[F],
    pool: &Matrix<F>,
    exclude: Option<usize>,
    continuous_dims: &[usize],
    k: usize,
) -> Result<Vec<usize>> {
    let available = pool.rows() - usize::from(exclude.is_some());
    if k == 0 {
        return Err(Error::config("k_neighbors must be at least 1"));
    }
    if available < k {
        return Err(Error::config(format!(
            "neighbor pool has {available} usable rows, need at least k={k}"
        )));
    }
    let mut dists: Vec<(F, usize)> = Vec::with_capacity(available);
    for r in 0..pool.rows() {
        if exclude == Some(r) {
            continue;
        }
        let row = pool.row(r);
        let mut d = F::zero();
        for &c in continuous_dims {
            let diff = x[c] - row[c];
            d += diff * diff;
        }
        dists.push((d, r));
    }
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(dists.into_iter().take(k).map(|(_, r)| r).collect())
}

/// Deterministic perturbation kernel: interpolate continuous dims toward
/// `pool[chosen]` with the given lambda, majority-vote categorical groups
/// over all of `neighbor_ids`.
pub fn perturb_with<F: Float>(
    x: &[F],
    neighbor_ids: &[usize],
    chosen: usize,
    lambda: F,
    pool: &Matrix<F>,
    schema: &ColumnSchema,
) -> Vec<F> {
    let neighbor = pool.row(chosen);
    let mut out = x.to_vec();
    for &c in schema.continuous_dims() {
        out[c] = x[c] + lambda * (neighbor[c] - x[c]);
    }
    for span in schema.categorical_spans() {
        let mut votes = vec![0usize; span.len()];
        for &nb in neighbor_ids {
            if let Some(cat) = argmax_onehot(&pool.row(nb)[span.clone()]) {
                votes[cat] += 1;
            }
        }
        let own = argmax_onehot(&x[span.clone()]);
        let best = votes.iter().copied().max().unwrap_or(0);
        let winners: Vec<usize> = votes
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (best > 0 && v == best).then_some(i))
            .collect();
        let category = match winners.len() {
            0 => match own {
                Some(o) => o,
                None => continue,
            },
            1 => winners[0],
            // tie among neighbor categories: keep x's own when it has one
            _ => own.unwrap_or(winners[0]),
        };
        for v in &mut out[span.clone()] {
            *v = F::zero();
        }
        out[span.start + category] = F::one();
    }
    out
}

fn argmax_onehot<F: Float>(group: &[F]) -> Option<usize> {
    let mut best: Option<(F, usize)> = None;
    for (i, &v) in group.iter().enumerate() {
        if v > F::zero() && best.is_none_or(|(bv, _)| v > bv) {
            best = Some((v, i));
        }
    }
    best.map(|(_, i)| i)
}

/// Draws the neighbor choice and lambda, then applies [`perturb_with`].
pub fn interpolate<F: Float, R: Rng>(
    x: &[F],
    neighbor_ids: &[usize],
    pool: &Matrix<F>,
    schema: &ColumnSchema,
    rng: &mut R,
) -> Vec<F> {
    debug_assert!(!neighbor_ids.is_empty());
    let chosen = neighbor_ids[rng.gen_range(0..neighbor_ids.len())];
    let lambda = F::c(rng.gen_range(0.0..1.0));
    perturb_with(x, neighbor_ids, chosen, lambda, pool, schema)
}

/// One-shot SMOTE-NC perturbation: nearest-neighbor search plus draw.
pub fn smote_nc_perturb<F: Float, R: Rng>(
    x: &[F],
    pool: &Matrix<F>,
    exclude: Option<usize>,
    schema: &ColumnSchema,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Vec<F>> {
    let neighbors = k_nearest(x, pool, exclude, schema.continuous_dims(), cfg.k_neighbors)?;
    Ok(interpolate(x, &neighbors, pool, schema, rng))
}

/// `k_nearest` over a pool given as row ids into a base matrix (no row
/// copying). `exclude_id` names a base row, typically the sample itself.
pub fn k_nearest_in<F: Float>(
    x: &[F],
    base: &Matrix<F>,
    pool_ids: &[usize],
    exclude_id: Option<usize>,
    continuous_dims: &[usize],
    k: usize,
) -> Result<Vec<usize>> {
    let available = pool_ids.len()
        - usize::from(exclude_id.map_or(false, |e| pool_ids.contains(&e)));
    if k == 0 {
        return Err(Error::config("k_neighbors must be at least 1"));
    }
    if available < k {
        return Err(Error::config(format!(
            "neighbor pool has {available} usable rows, need at least k={k}"
        )));
    }
    let mut dists: Vec<(F, usize)> = Vec::with_capacity(available);
    for &id in pool_ids {
        if exclude_id == Some(id) {
            continue;
        }
        let row = base.row(id);
        let mut d = F::zero();
        for &c in continuous_dims {
            let diff = x[c] - row[c];
            d += diff * diff;
        }
        dists.push((d, id));
    }
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(dists.into_iter().take(k).map(|(_, id)| id).collect())
}

/// One augmentation pool and the rows that draw their neighbors from it.
pub struct NeighborGroup {
    pub pool: Vec<usize>,
    pub members: Vec<usize>,
}

/// Precomputed nearest neighbors for selected rows of a training matrix.
/// Neighbor sets never change across epochs (fixed pools, input space), so
/// the brute-force search runs once and only the draws stay per-epoch.
pub struct NeighborTable {
    neighbors: Vec<Vec<usize>>,
}

impl NeighborTable {
    pub fn build<F: Float>(
        x: &Matrix<F>,
        groups: &[NeighborGroup],
        schema: &ColumnSchema,
        k: usize,
    ) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); x.rows()];
        for group in groups {
            for &row in &group.members {
                neighbors[row] = k_nearest_in(
                    x.row(row),
                    x,
                    &group.pool,
                    Some(row),
                    schema.continuous_dims(),
                    k,
                )?;
            }
        }
        Ok(NeighborTable { neighbors })
    }

    pub fn of(&self, row: usize) -> &[usize] {
        &self.neighbors[row]
    }
}
