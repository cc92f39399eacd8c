//! Clustering evaluation: accuracy and balanced accuracy after optimal
//! cluster-to-class assignment (Hungarian algorithm), plus NMI and ARI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint counts of (true class, predicted cluster) pairs.
#[derive(Clone, Debug)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>, // [true][pred]
    row_marginals: Vec<u64>,
    col_marginals: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn from_labels(y_true: &[usize], y_pred: &[usize]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::config("label vectors have different lengths"));
        }
        if y_true.is_empty() {
            return Err(Error::config("empty label vectors"));
        }
        let n_true = y_true.iter().max().unwrap() + 1;
        let n_pred = y_pred.iter().max().unwrap() + 1;
        let mut counts = vec![vec![0u64; n_pred]; n_true];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            counts[t][p] += 1;
        }
        Ok(Self::from_counts(counts))
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let n_pred = counts.first().map_or(0, |r| r.len());
        let row_marginals: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let mut col_marginals = vec![0u64; n_pred];
        for row in &counts {
            for (c, v) in row.iter().enumerate() {
                col_marginals[c] += v;
            }
        }
        let n = row_marginals.iter().sum();
        ContingencyTable {
            counts,
            row_marginals,
            col_marginals,
            n,
        }
    }

    pub fn n_true(&self) -> usize {
        self.counts.len()
    }

    pub fn n_pred(&self) -> usize {
        self.counts.first().map_or(0, |r| r.len())
    }

    pub fn count(&self, t: usize, p: usize) -> u64 {
        self.counts[t][p]
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// Injective map predicted cluster -> true class maximizing matched count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    /// `cluster_to_class[p] = Some(t)` when cluster `p` is matched to class `t`.
    pub cluster_to_class: Vec<Option<usize>>,
    /// Total count on matched cells.
    pub matched: u64,
}

/// Maximum-weight assignment via the Hungarian algorithm on the padded
/// square cost matrix (integer arithmetic throughout, so the optimum is
/// exact).
///
/// Clusters are processed in a canonical content-based order, which makes
/// tie-breaking among co-optimal assignments invariant under any
/// relabeling of the cluster ids.
pub fn hungarian_assign(table: &ContingencyTable) -> Assignment {
    let n_true = table.n_true();
    let n_pred = table.n_pred();
    let size = n_true.max(n_pred);
    if size == 0 || table.n() == 0 {
        return Assignment {
            cluster_to_class: vec![None; n_pred],
            matched: 0,
        };
    }

    // canonical cluster order: by count column (descending), then id
    let mut cluster_order: Vec<usize> = (0..n_pred).collect();
    cluster_order.sort_by(|&a, &b| {
        let col_a: Vec<u64> = (0..n_true).map(|t| table.counts[t][a]).collect();
        let col_b: Vec<u64> = (0..n_true).map(|t| table.counts[t][b]).collect();
        col_b.cmp(&col_a).then(a.cmp(&b))
    });
    let cluster_at = |row: usize| -> Option<usize> { cluster_order.get(row).copied() };

    // Minimize (max - count); dummy rows/cols carry weight 0.
    let max_count = table
        .counts
        .iter()
        .flatten()
        .copied()
        .max()
        .unwrap_or(0) as i64;
    let weight = |t: usize, row: usize| -> i64 {
        match cluster_at(row) {
            Some(p) if t < n_true => table.counts[t][p] as i64,
            _ => 0,
        }
    };

    // Rows = clusters (canonical order), columns = classes, 1-based.
    let n = size;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // matched_row[col] = row
    let mut way = vec![0usize; n + 1];
    const INF: i64 = i64::MAX / 4;

    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cost = max_count - weight(j - 1, i0 - 1);
                let cur = cost - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut cluster_to_class = vec![None; n_pred];
    let mut matched = 0u64;
    for col in 1..=n {
        let row = matched_row[col];
        if row == 0 {
            continue;
        }
        let class = col - 1;
        if class >= n_true {
            continue;
        }
        if let Some(cluster) = cluster_at(row - 1) {
            cluster_to_class[cluster] = Some(class);
            matched += table.counts[class][cluster];
        }
    }
    Assignment {
        cluster_to_class,
        matched,
    }
}

/// Clustering accuracy: matched count under the optimal assignment over n.
pub fn clustering_accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let table = ContingencyTable::from_labels(y_true, y_pred)?;
    let assignment = hungarian_assign(&table);
    Ok(assignment.matched as f64 / table.n() as f64)
}

/// Mean per-true-class recall under the same optimal assignment. Classes
/// absent from `y_true` do not contribute.
pub fn balanced_accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let table = ContingencyTable::from_labels(y_true, y_pred)?;
    let assignment = hungarian_assign(&table);
    let recall = per_class_recall(&table, &assignment);
    Ok(recall.iter().map(|(_, r)| r).sum::<f64>() / recall.len() as f64)
}

/// Recall per true class that actually occurs in the table.
fn per_class_recall(table: &ContingencyTable, assignment: &Assignment) -> Vec<(usize, f64)> {
    let mut class_to_cluster = vec![None; table.n_true()];
    for (cluster, class) in assignment.cluster_to_class.iter().enumerate() {
        if let Some(t) = class {
            class_to_cluster[*t] = Some(cluster);
        }
    }
    (0..table.n_true())
        .filter(|&t| table.row_marginals[t] > 0)
        .map(|t| {
            let total = table.row_marginals[t];
            let hit = class_to_cluster[t].map_or(0, |p| table.counts[t][p]);
            (t, hit as f64 / total as f64)
        })
        .collect()
}

/// Entropy over integer marginals; counts are sorted before summation so
/// the float result is identical for any ordering of the partition ids.
fn entropy(marginals: &[u64], n: u64) -> f64 {
    let n = n as f64;
    let mut counts: Vec<u64> = marginals.iter().copied().filter(|&c| c > 0).collect();
    counts.sort_unstable();
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization.
///
/// If either partition has zero entropy, NMI is 0 unless both are the same
/// single cluster, in which case it is 1. Cell terms are accumulated in a
/// canonical (sorted) order, so relabeling either partition cannot move
/// the result even at the last bit.
pub fn nmi(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let table = ContingencyTable::from_labels(y_true, y_pred)?;
    let h_true = entropy(&table.row_marginals, table.n);
    let h_pred = entropy(&table.col_marginals, table.n);
    if h_true <= 0.0 || h_pred <= 0.0 {
        let single_true = table.row_marginals.iter().filter(|&&c| c > 0).count() == 1;
        let single_pred = table.col_marginals.iter().filter(|&&c| c > 0).count() == 1;
        return Ok(if single_true && single_pred { 1.0 } else { 0.0 });
    }
    let n = table.n as f64;
    let mut cells: Vec<(u64, u64, u64)> = Vec::new();
    for (t, row) in table.counts.iter().enumerate() {
        for (p, &c) in row.iter().enumerate() {
            if c > 0 {
                cells.push((c, table.row_marginals[t], table.col_marginals[p]));
            }
        }
    }
    cells.sort_unstable();
    let mut mi = 0.0;
    for (c, a, b) in cells {
        let pij = c as f64 / n;
        let pi = a as f64 / n;
        let pj = b as f64 / n;
        mi += pij * (pij / (pi * pj)).ln();
    }
    Ok((mi / ((h_true + h_pred) / 2.0)).clamp(0.0, 1.0))
}

fn choose2(x: u64) -> u128 {
    let x = x as u128;
    x * x.saturating_sub(1) / 2
}

/// Adjusted Rand index via pair counting.
///
/// When the expected and maximum indices coincide (both partitions trivial)
/// the result is 1 for identical partitions and 0 otherwise.
pub fn ari(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let table = ContingencyTable::from_labels(y_true, y_pred)?;
    if table.n < 2 {
        return Err(Error::config("ari needs at least two samples"));
    }
    let sum_ij: u128 = table.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: u128 = table.row_marginals.iter().map(|&c| choose2(c)).sum();
    let sum_b: u128 = table.col_marginals.iter().map(|&c| choose2(c)).sum();
    let total = choose2(table.n);

    let expected = sum_a as f64 * sum_b as f64 / total as f64;
    let maximum = (sum_a as f64 + sum_b as f64) / 2.0;
    if (maximum - expected).abs() < f64::EPSILON {
        // Degenerate: e.g. both all-singletons or both one cluster.
        return Ok(if sum_ij as f64 == maximum { 1.0 } else { 0.0 });
    }
    Ok((sum_ij as f64 - expected) / (maximum - expected))
}

/// Full evaluation bundle for one prediction, serialized as the
/// `MetricsReport` JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub bacc: f64,
    pub nmi: f64,
    pub ari: f64,
    /// cluster id -> matched class id (absent means unmatched cluster)
    pub assignment: BTreeMap<String, Option<usize>>,
    pub n: usize,
    /// true class id -> recall under the optimal assignment
    pub per_class_recall: BTreeMap<String, f64>,
}

impl MetricsReport {
    pub fn compute(y_true: &[usize], y_pred: &[usize]) -> Result<Self> {
        let table = ContingencyTable::from_labels(y_true, y_pred)?;
        let assignment = hungarian_assign(&table);
        let recall = per_class_recall(&table, &assignment);
        let bacc = recall.iter().map(|(_, r)| r).sum::<f64>() / recall.len() as f64;
        Ok(MetricsReport {
            acc: assignment.matched as f64 / table.n() as f64,
            bacc,
            nmi: nmi(y_true, y_pred)?,
            ari: ari(y_true, y_pred)?,
            assignment: assignment
                .cluster_to_class
                .iter()
                .enumerate()
                .map(|(p, t)| (p.to_string(), *t))
                .collect(),
            n: table.n() as usize,
            per_class_recall: recall
                .into_iter()
                .map(|(t, r)| (t.to_string(), r))
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive maximum over all injective cluster->class maps; oracle for
    /// the Hungarian implementation on small tables.
    pub(crate) fn brute_force_matched(table: &ContingencyTable) -> u64 {
        let n_true = table.n_true();
        let n_pred = table.n_pred();
        let mut best = 0u64;
        let mut classes: Vec<Option<usize>> = vec![None; n_pred];
        fn recur(
            table: &ContingencyTable,
            cluster: usize,
            used: &mut Vec<bool>,
            classes: &mut Vec<Option<usize>>,
            acc: u64,
            best: &mut u64,
        ) {
            if cluster == table.n_pred() {
                *best = (*best).max(acc);
                return;
            }
            // leave this cluster unmatched
            recur(table, cluster + 1, used, classes, acc, best);
            for t in 0..table.n_true() {
                if used[t] {
                    continue;
                }
                used[t] = true;
                classes[cluster] = Some(t);
                recur(
                    table,
                    cluster + 1,
                    used,
                    classes,
                    acc + table.count(t, cluster),
                    best,
                );
                classes[cluster] = None;
                used[t] = false;
            }
        }
        let mut used = vec![false; n_true];
        recur(table, 0, &mut used, &mut classes, 0, &mut best);
        best
    }

    #[test]
    fn diagonal_table_maps_identity() {
        let table = ContingencyTable::from_counts(vec![vec![5, 0], vec![0, 3]]);
        let a = hungarian_assign(&table);
        assert_eq!(a.matched, 8);
        assert_eq!(a.cluster_to_class, vec![Some(0), Some(1)]);
    }

    #[test]
    fn anti_diagonal_table_maps_swap() {
        let table = ContingencyTable::from_counts(vec![vec![0, 5], vec![3, 0]]);
        let a = hungarian_assign(&table);
        assert_eq!(a.matched, 8);
        assert_eq!(a.cluster_to_class, vec![Some(1), Some(0)]);
    }

    #[test]
    fn hungarian_matches_brute_force_on_random_tables() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(77, "hungarian");
        for _ in 0..100 {
            let rows = rng.gen_range(1..=6);
            let cols = rng.gen_range(1..=6);
            let counts: Vec<Vec<u64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(0..20)).collect())
                .collect();
            let table = ContingencyTable::from_counts(counts);
            if table.n() == 0 {
                continue;
            }
            let a = hungarian_assign(&table);
            assert_eq!(a.matched, brute_force_matched(&table));
        }
    }

    #[test]
    fn relabeling_gives_perfect_accuracy() {
        let y_true = [0, 0, 1, 1, 2, 2];
        let y_pred = [2, 2, 0, 0, 1, 1];
        assert_eq!(clustering_accuracy(&y_true, &y_pred).unwrap(), 1.0);
    }

    #[test]
    fn partial_overlap_accuracy() {
        let y_true = [0, 0, 1, 1, 2, 2];
        let y_pred = [0, 0, 0, 1, 1, 1];
        let acc = clustering_accuracy(&y_true, &y_pred).unwrap();
        assert!((acc - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_single_cluster_prediction() {
        let y_true = [0, 0, 0, 1];
        let y_pred = [0, 0, 0, 0];
        assert!((clustering_accuracy(&y_true, &y_pred).unwrap() - 0.75).abs() < 1e-12);
        assert!((balanced_accuracy(&y_true, &y_pred).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_partitions_score_one() {
        let y = [0, 1, 2, 0, 1, 2];
        assert!((nmi(&y, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((ari(&y, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossed_pairs_have_negative_ari() {
        let y_true = [0, 0, 1, 1];
        let y_pred = [0, 1, 0, 1];
        assert!((ari(&y_true, &y_pred).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_prediction_scores_zero() {
        let y_true = [0, 0, 1, 1];
        let y_pred = [0, 0, 0, 0];
        assert_eq!(ari(&y_true, &y_pred).unwrap(), 0.0);
        assert_eq!(nmi(&y_true, &y_pred).unwrap(), 0.0);
    }

    #[test]
    fn metrics_invariant_under_cluster_relabeling() {
        let y_true = [0, 0, 1, 1, 2, 2, 0, 1];
        let y_pred = [1, 1, 2, 0, 0, 0, 1, 2];
        let relabeled: Vec<usize> = y_pred.iter().map(|&p| (p + 1) % 3).collect();
        assert_eq!(
            clustering_accuracy(&y_true, &y_pred).unwrap(),
            clustering_accuracy(&y_true, &relabeled).unwrap()
        );
        assert_eq!(
            balanced_accuracy(&y_true, &y_pred).unwrap(),
            balanced_accuracy(&y_true, &relabeled).unwrap()
        );
        assert!((nmi(&y_true, &y_pred).unwrap() - nmi(&y_true, &relabeled).unwrap()).abs() < 1e-12);
        assert!((ari(&y_true, &y_pred).unwrap() - ari(&y_true, &relabeled).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn report_serializes_deterministically() {
        let y_true = [0, 0, 1, 1];
        let y_pred = [1, 1, 0, 0];
        let a = serde_json::to_string(&MetricsReport::compute(&y_true, &y_pred).unwrap()).unwrap();
        let b = serde_json::to_string(&MetricsReport::compute(&y_true, &y_pred).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
