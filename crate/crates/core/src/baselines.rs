//! Comparison methods run under the identical protocol: k-means with
//! `k = C^u` on the unlabeled test rows, and a supervised-projection
//! baseline (classifier trained on known classes only, k-means in its
//! penultimate-layer space).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{BatchSampler, TrainSplit};
use crate::error::{Error, Result};
use crate::joint::Architecture;
use crate::matrix::Matrix;
use crate::nn::adam::Adam;
use crate::nn::loss::{cross_entropy_grad, one_hot};
use crate::nn::{Activation, DenseNet, LayerSpec};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Float;

#[derive(Clone, Debug)]
pub struct KmeansResult<F> {
    pub labels: Vec<usize>,
    pub centroids: Matrix<F>,
    pub inertia: F,
}

fn squared_distance<F: Float>(a: &[F], b: &[F]) -> F {
    let mut d = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        let diff = x - y;
        d += diff * diff;
    }
    d
}

fn nearest_centroid<F: Float>(x: &[F], centroids: &Matrix<F>) -> (usize, F) {
    let mut best = 0usize;
    let mut best_d = squared_distance(x, centroids.row(0));
    for c in 1..centroids.rows() {
        let d = squared_distance(x, centroids.row(c));
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// k-means++ seeding: first centroid uniform, the rest drawn with
/// probability proportional to squared distance from the chosen set.
fn kmeans_pp_init<F: Float>(x: &Matrix<F>, k: usize, rng: &mut ChaCha8Rng) -> Matrix<F> {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));

    let mut d2: Vec<F> = (0..n)
        .map(|r| squared_distance(x.row(r), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: F = d2.iter().copied().sum();
        let chosen = if total > F::zero() {
            let mut target = F::c(rng.gen::<f64>()) * total;
            let mut pick = n - 1;
            for (r, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = r;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(chosen));
        for (r, d) in d2.iter_mut().enumerate() {
            let nd = squared_distance(x.row(r), centroids.row(c));
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding. Converges when assignments
/// stop changing or `max_iter` is reached; an emptied cluster is re-seeded
/// at the point farthest from its centroid.
pub fn kmeans<F: Float>(
    x: &Matrix<F>,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KmeansResult<F>> {
    let n = x.rows();
    if k == 0 || n < k {
        return Err(Error::config(format!("kmeans needs n >= k >= 1, got n={n} k={k}")));
    }
    let mut rng = seeded(seed, "kmeans");
    let mut centroids = kmeans_pp_init(x, k, &mut rng);
    let mut labels = vec![0usize; n];

    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for r in 0..n {
            let (c, _) = nearest_centroid(x.row(r), &centroids);
            if labels[r] != c {
                labels[r] = c;
                changed = true;
            }
        }

        let mut sums: Matrix<F> = Matrix::zeros(k, x.cols());
        let mut counts = vec![0usize; k];
        for (r, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            let row = x.row(r);
            let s = sums.row_mut(c);
            for (a, &b) in s.iter_mut().zip(row) {
                *a += b;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // farthest point from its current centroid restarts the cluster
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = squared_distance(x.row(a), centroids.row(labels[a]));
                        let db = squared_distance(x.row(b), centroids.row(labels[b]));
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centroids.row_mut(c).copy_from_slice(x.row(far));
                labels[far] = c;
                changed = true;
                continue;
            }
            let inv = F::one() / F::of_usize(counts[c]);
            let s = sums.row(c).to_vec();
            let cr = centroids.row_mut(c);
            for (v, &sv) in cr.iter_mut().zip(&s) {
                *v = sv * inv;
            }
        }
        if !changed {
            break;
        }
    }

    let mut inertia = F::zero();
    for (r, label) in labels.iter_mut().enumerate() {
        let (c, d) = nearest_centroid(x.row(r), &centroids);
        *label = c;
        inertia += d;
    }
    Ok(KmeansResult {
        labels,
        centroids,
        inertia,
    })
}

/// Multi-restart k-means keeping the lowest inertia (ties to the lowest
/// restart index).
pub fn kmeans_best<F: Float>(
    x: &Matrix<F>,
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<KmeansResult<F>> {
    let mut best: Option<KmeansResult<F>> = None;
    for r in 0..restarts.max(1) {
        let run = kmeans(x, k, derive_seed(seed, &format!("restart-{r}")), max_iter)?;
        let better = match &best {
            None => true,
            Some(b) => run.inertia < b.inertia,
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

/// Default Lloyd iteration cap.
pub const KMEANS_MAX_ITER: usize = 300;
/// Default restart count.
pub const KMEANS_RESTARTS: usize = 10;

/// Supervised-projection baseline: train a classifier (encoder + softmax
/// over the known classes) on labeled training rows only, embed the target
/// rows with its penultimate layer, and cluster them with k-means
/// (`k = n_unknown`). Unlabeled training rows are never touched.
pub fn projection_baseline<F: Float>(
    train: &TrainSplit<F>,
    n_known: usize,
    target_x: &Matrix<F>,
    n_unknown: usize,
    arch: &Architecture,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let labeled = train.labeled_indices();
    if labeled.is_empty() {
        return Err(Error::data("projection baseline needs labeled training rows"));
    }
    let x = train.x.select_rows(&labeled);
    let y: Vec<usize> = labeled
        .iter()
        .map(|&i| train.labels[i].expect("labeled index"))
        .collect();

    let (hidden, latent) = arch.resolve(x.cols());
    let mut rng = seeded(seed, "baseline-init");
    let mut encoder = DenseNet::new(
        x.cols(),
        &[
            LayerSpec::new(hidden, Activation::Relu),
            LayerSpec::new(latent, Activation::Identity),
        ],
        &mut rng,
    )?;
    let mut head = DenseNet::new(latent, &[LayerSpec::new(n_known, Activation::Softmax)], &mut rng)?;

    let lr = F::c(lr);
    let mut opt_enc = Adam::new(&encoder, lr);
    let mut opt_head = Adam::new(&head, lr);
    let mut sampler = BatchSampler::new(
        x.rows(),
        batch_size.min(x.rows()).max(2),
        derive_seed(seed, "baseline-sampler"),
    )?;
    let targets_all = one_hot::<F>(&y, n_known)?;

    for _ in 0..epochs {
        for indices in sampler.epoch() {
            let xb = x.select_rows(&indices);
            let tb = targets_all.select_rows(&indices);
            let enc_trace = encoder.forward_trace(&xb)?;
            let head_trace = head.forward_trace(enc_trace.output())?;
            let (_, d_out) = cross_entropy_grad(head_trace.output(), &tb)?;
            let head_bp = head.backward_from(&head_trace, &d_out)?;
            let enc_bp = encoder.backward_from(&enc_trace, &head_bp.d_input)?;
            opt_head.step(&mut head, &head_bp.tape)?;
            opt_enc.step(&mut encoder, &enc_bp.tape)?;
        }
    }

    // penultimate layer of the classifier = encoder output
    let embedded = encoder.forward(target_x)?;
    let result = kmeans_best(
        &embedded,
        n_unknown,
        derive_seed(seed, "baseline-kmeans"),
        KMEANS_MAX_ITER,
        KMEANS_RESTARTS,
    )?;
    Ok(result.labels)
}
