//! Joint training: a supervised classifier over the known classes plus an
//! aggregate "unlabeled" class, and a pseudo-labeled clustering head over
//! the unknown classes, alternately optimized over a shared encoder.
//!
//! Per mini-batch, the classification network and the encoder are updated
//! first with `w1 * l_class + (1 - w1) * l_reg`; the batch's unlabeled rows
//! are then re-embedded and the clustering network and encoder are updated
//! with `w2 * l_clust + (1 - w2) * l_reg`. Each network has its own Adam
//! instance (the encoder one per loss, with separate moment state), so a
//! head is only ever touched by its own loss.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{interpolate, AugmentConfig, NeighborGroup, NeighborTable};
use crate::data::{assemble_batch, Batch, BatchSampler, ColumnSchema, TrainSplit};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::adam::Adam;
use crate::nn::loss::{cross_entropy_grad, mse, mse_grad, one_hot, LOG_CLAMP};
use crate::nn::{Activation, DenseNet, LayerSpec};
use crate::pseudo::{assign_pseudo_labels, PseudoLabelSet};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Float;

/// Encoder sizing. Unset fields derive from the input dimension:
/// `latent = min(d, 64)`, `hidden = 2 * latent`.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: Option<usize>,
    pub latent: Option<usize>,
}

impl Architecture {
    pub fn resolve(&self, input_dim: usize) -> (usize, usize) {
        let latent = self.latent.unwrap_or_else(|| input_dim.clamp(1, 64));
        let hidden = self.hidden.unwrap_or(2 * latent);
        (hidden, latent)
    }
}

/// Encoder, classifier head (`n_known + 1` softmax outputs, the extra one
/// aggregating all unlabeled rows) and clustering head (`n_unknown` softmax
/// outputs), all sharing the latent space.
#[derive(Clone, Debug, PartialEq)]
pub struct JointModel<F> {
    pub encoder: DenseNet<F>,
    pub classifier: DenseNet<F>,
    pub cluster_head: DenseNet<F>,
}

impl<F: Float> JointModel<F> {
    pub fn new<R: Rng>(
        input_dim: usize,
        arch: &Architecture,
        n_known: usize,
        n_unknown: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_known == 0 || n_unknown == 0 {
            return Err(Error::config("need at least one known and one unknown class"));
        }
        let (hidden, latent) = arch.resolve(input_dim);
        let encoder = DenseNet::new(
            input_dim,
            &[
                LayerSpec::new(hidden, Activation::Relu),
                LayerSpec::new(latent, Activation::Identity),
            ],
            rng,
        )?;
        let classifier = DenseNet::new(
            latent,
            &[LayerSpec::new(n_known + 1, Activation::Softmax)],
            rng,
        )?;
        let cluster_head = DenseNet::new(
            latent,
            &[LayerSpec::new(n_unknown, Activation::Softmax)],
            rng,
        )?;
        Ok(JointModel {
            encoder,
            classifier,
            cluster_head,
        })
    }

    /// Builds a model around an already-pretrained encoder.
    pub fn with_encoder<R: Rng>(
        encoder: DenseNet<F>,
        n_known: usize,
        n_unknown: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_known == 0 || n_unknown == 0 {
            return Err(Error::config("need at least one known and one unknown class"));
        }
        let latent = encoder.output_dim();
        let classifier = DenseNet::new(
            latent,
            &[LayerSpec::new(n_known + 1, Activation::Softmax)],
            rng,
        )?;
        let cluster_head = DenseNet::new(
            latent,
            &[LayerSpec::new(n_unknown, Activation::Softmax)],
            rng,
        )?;
        Ok(JointModel {
            encoder,
            classifier,
            cluster_head,
        })
    }

    pub fn n_known(&self) -> usize {
        self.classifier.output_dim() - 1
    }

    pub fn n_unknown(&self) -> usize {
        self.cluster_head.output_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn embed(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        self.encoder.forward(x)
    }

    /// Deterministic cluster ids: argmax of the clustering head, first
    /// maximum wins.
    pub fn predict_clusters(&self, x: &Matrix<F>) -> Result<Vec<usize>> {
        let q = self.cluster_head.forward(&self.embed(x)?)?;
        Ok((0..q.rows()).map(|r| argmax(q.row(r))).collect())
    }
}

fn argmax<F: Float>(row: &[F]) -> usize {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Dot product of two clustering-head probability rows; ~1 when both rows
/// put their mass on the same cluster, ~0 on different clusters.
pub fn pair_score<F: Float>(q_i: &[F], q_j: &[F]) -> F {
    let mut s = F::zero();
    for (&a, &b) in q_i.iter().zip(q_j) {
        s += a * b;
    }
    s
}

/// Pairwise binary cross-entropy against the pseudo-labels: per anchor i,
/// mean over j != i of `-y log p - (1-y) log(1-p)` with p clamped into
/// `[1e-12, 1 - 1e-12]`, then averaged over anchors.
pub fn clustering_loss<F: Float>(q: &Matrix<F>, pseudo: &PseudoLabelSet) -> Result<F> {
    Ok(clustering_loss_grad(q, pseudo)?.0)
}

/// Clustering loss plus its gradient with respect to `q`.
pub fn clustering_loss_grad<F: Float>(
    q: &Matrix<F>,
    pseudo: &PseudoLabelSet,
) -> Result<(F, Matrix<F>)> {
    let b = q.rows();
    if pseudo.size() != b {
        return Err(Error::config("pseudo-label set does not match batch size"));
    }
    if b < 2 {
        return Err(Error::config("clustering loss needs at least two rows"));
    }
    let eps = F::c(LOG_CLAMP);
    let one = F::one();
    let hi = one - eps;
    let norm = F::of_usize(b * (b - 1));

    // pair scores and per-pair gradient coefficients dL/dp_ij
    let mut coef = Matrix::zeros(b, b);
    let mut loss = F::zero();
    for i in 0..b {
        for j in 0..b {
            if i == j {
                continue;
            }
            let p = pair_score(q.row(i), q.row(j));
            let p_clamped = if p < eps {
                eps
            } else if p > hi {
                hi
            } else {
                p
            };
            let y = pseudo.is_positive(i, j);
            loss += if y {
                -p_clamped.ln()
            } else {
                -(one - p_clamped).ln()
            };
            // clamped regions are flat, so they contribute no gradient
            if p >= eps && p <= hi {
                coef[(i, j)] = if y { -one / p } else { one / (one - p) } / norm;
            }
        }
    }
    loss /= norm;

    // dL/dq_i = sum_{j != i} (c_ij + c_ji) q_j
    let mut grad = Matrix::zeros(b, q.cols());
    for i in 0..b {
        for j in 0..b {
            if i == j {
                continue;
            }
            let w = coef[(i, j)] + coef[(j, i)];
            if w == F::zero() {
                continue;
            }
            let qj = q.row(j);
            let gi = grad.row_mut(i);
            for (g, &v) in gi.iter_mut().zip(qj) {
                *g += w * v;
            }
        }
    }
    Ok((loss, grad))
}

/// Consistency term: MSE between a head's outputs on the latent of a sample
/// and of its perturbed counterpart.
pub fn regularization_loss<F: Float>(q: &Matrix<F>, q_bar: &Matrix<F>) -> Result<F> {
    if q.rows() != q_bar.rows() || q.cols() != q_bar.cols() {
        return Err(Error::config("regularization shape mismatch"));
    }
    mse(q.data(), q_bar.data())
}

/// All joint-training hyperparameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Classification loss weight; `1 - w1` weights its regularizer.
    pub w1: f64,
    /// Clustering loss weight; `1 - w2` weights its regularizer.
    pub w2: f64,
    /// Positive pairs per anchor for pseudo-labels.
    pub top_k: usize,
    pub lr_classifier: f64,
    pub lr_cluster: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            w1: 0.8,
            w2: 0.9,
            top_k: 5,
            lr_classifier: 1e-3,
            lr_cluster: 1e-3,
            batch_size: 512,
            epochs: 30,
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w1) || !(0.0..=1.0).contains(&self.w2) {
            return Err(Error::config("w1 and w2 must lie in [0, 1]"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("batch_size must be at least 2"));
        }
        if self.top_k == 0 {
            return Err(Error::config("top_k must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Per-epoch means written to the training log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_class: f64,
    pub l_reg_classifier: f64,
    pub l_clust: f64,
    pub l_reg_cluster: f64,
    /// Fraction of positive pseudo-label pairs sharing a true class;
    /// present only when an evaluation oracle was supplied.
    pub pseudo_precision: Option<f64>,
    /// Batches whose clustering step was skipped (< 2 unlabeled rows).
    pub skipped_cluster_steps: usize,
    /// Per-batch precision values behind `pseudo_precision` (debug dumps).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub batch_pseudo_precisions: Vec<f64>,
}

/// Owns the optimizers, augmentation tables and randomness of one joint
/// training run.
pub struct Trainer<F> {
    model: JointModel<F>,
    cfg: TrainConfig,
    sampler: BatchSampler,
    schema: ColumnSchema,
    neighbors: NeighborTable,
    opt_class_enc: Adam<F>,
    opt_class_head: Adam<F>,
    opt_clust_enc: Adam<F>,
    opt_clust_head: Adam<F>,
    augment_rng: ChaCha8Rng,
    epoch: usize,
}

impl<F: Float> Trainer<F> {
    pub fn new(
        model: JointModel<F>,
        split: &TrainSplit<F>,
        schema: &ColumnSchema,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if model.encoder.input_dim() != split.x.cols() {
            return Err(Error::config(format!(
                "encoder expects {} inputs, data has {}",
                model.encoder.input_dim(),
                split.x.cols()
            )));
        }
        if model.classifier.input_dim() != model.latent_dim()
            || model.cluster_head.input_dim() != model.latent_dim()
        {
            return Err(Error::config("head input dims do not match encoder latent"));
        }

        // Augmentation pools: labeled rows draw neighbors from their own
        // class, unlabeled rows from the whole unlabeled set.
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); model.n_known()];
        let mut unlabeled: Vec<usize> = Vec::new();
        for (i, l) in split.labels.iter().enumerate() {
            match l {
                Some(c) => by_class[*c].push(i),
                None => unlabeled.push(i),
            }
        }
        let mut groups: Vec<NeighborGroup> = by_class
            .into_iter()
            .map(|rows| NeighborGroup {
                pool: rows.clone(),
                members: rows,
            })
            .collect();
        groups.push(NeighborGroup {
            pool: unlabeled.clone(),
            members: unlabeled,
        });
        let neighbors = NeighborTable::build(&split.x, &groups, schema, cfg.augment.k_neighbors)?;

        let sampler = BatchSampler::new(
            split.len(),
            cfg.batch_size.min(split.len()).max(2),
            derive_seed(cfg.seed, "joint-sampler"),
        )?;
        let lr_c = F::c(cfg.lr_classifier);
        let lr_u = F::c(cfg.lr_cluster);
        Ok(Trainer {
            opt_class_enc: Adam::new(&model.encoder, lr_c),
            opt_class_head: Adam::new(&model.classifier, lr_c),
            opt_clust_enc: Adam::new(&model.encoder, lr_u),
            opt_clust_head: Adam::new(&model.cluster_head, lr_u),
            augment_rng: seeded(cfg.seed, "joint-augment"),
            sampler,
            schema: schema.clone(),
            neighbors,
            model,
            cfg,
            epoch: 0,
        })
    }

    pub fn model(&self) -> &JointModel<F> {
        &self.model
    }

    pub fn into_model(self) -> JointModel<F> {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Perturbed counterparts for the given training rows (fresh draws).
    fn perturb_rows(&mut self, split: &TrainSplit<F>, row_ids: &[usize]) -> Matrix<F> {
        let mut out = Matrix::zeros(row_ids.len(), split.x.cols());
        for (r, &row) in row_ids.iter().enumerate() {
            let x_bar = interpolate(
                split.x.row(row),
                self.neighbors.of(row),
                &split.x,
                &self.schema,
                &mut self.augment_rng,
            );
            out.row_mut(r).copy_from_slice(&x_bar);
        }
        out
    }

    /// Step (A): update encoder and classifier on the full batch, unlabeled
    /// rows targeting the aggregate class. Returns (l_class, l_reg).
    pub fn classification_step(
        &mut self,
        split: &TrainSplit<F>,
        batch: &Batch<F>,
    ) -> Result<(f64, f64)> {
        let w1 = F::c(self.cfg.w1);
        let x_bar = self.perturb_rows(split, &batch.row_ids);

        let enc_trace = self.model.encoder.forward_trace(&batch.x)?;
        let enc_trace_bar = self.model.encoder.forward_trace(&x_bar)?;
        let head_trace = self.model.classifier.forward_trace(enc_trace.output())?;
        let head_trace_bar = self
            .model
            .classifier
            .forward_trace(enc_trace_bar.output())?;

        let targets = one_hot::<F>(&batch.targets, self.model.n_known() + 1)?;
        let (ce, d_ce) = cross_entropy_grad(head_trace.output(), &targets)?;
        let (reg, d_reg_flat) = mse_grad(head_trace.output().data(), head_trace_bar.output().data())?;
        let d_reg = Matrix::from_vec(batch.x.rows(), targets.cols(), d_reg_flat)?;

        let one = F::one();
        let mut d_out = d_ce;
        d_out.scale(w1);
        d_out.add_scaled(&d_reg, one - w1);
        let mut d_out_bar = d_reg;
        d_out_bar.scale(-(one - w1));

        let head_bp = self.model.classifier.backward_from(&head_trace, &d_out)?;
        let head_bp_bar = self
            .model
            .classifier
            .backward_from(&head_trace_bar, &d_out_bar)?;
        let mut head_tape = head_bp.tape;
        head_tape.accumulate(&head_bp_bar.tape);

        let enc_bp = self.model.encoder.backward_from(&enc_trace, &head_bp.d_input)?;
        let enc_bp_bar = self
            .model
            .encoder
            .backward_from(&enc_trace_bar, &head_bp_bar.d_input)?;
        let mut enc_tape = enc_bp.tape;
        enc_tape.accumulate(&enc_bp_bar.tape);

        self.opt_class_head.step(&mut self.model.classifier, &head_tape)?;
        self.opt_class_enc.step(&mut self.model.encoder, &enc_tape)?;
        Ok((ce.to_f64().unwrap(), reg.to_f64().unwrap()))
    }

    /// Step (B): re-embed the batch's unlabeled rows with the just-updated
    /// encoder, derive pseudo-labels, and update encoder and clustering
    /// head. Returns None when the batch holds fewer than 2 unlabeled rows.
    ///
    /// `oracle` is the evaluation-only ground truth for training rows, used
    /// solely to log pseudo-label precision; it never influences updates.
    pub fn clustering_step(
        &mut self,
        split: &TrainSplit<F>,
        batch: &Batch<F>,
        oracle: Option<&[usize]>,
    ) -> Result<Option<(f64, f64, Option<f64>)>> {
        if batch.unlabeled_pos.len() < 2 {
            return Ok(None);
        }
        let w2 = F::c(self.cfg.w2);
        let u_rows: Vec<usize> = batch
            .unlabeled_pos
            .iter()
            .map(|&p| batch.row_ids[p])
            .collect();
        let x_u = split.x.select_rows(&u_rows);
        let x_u_bar = self.perturb_rows(split, &u_rows);

        let enc_trace = self.model.encoder.forward_trace(&x_u)?;
        let enc_trace_bar = self.model.encoder.forward_trace(&x_u_bar)?;

        let k = self.cfg.top_k.min(u_rows.len() - 1);
        let pseudo = assign_pseudo_labels(enc_trace.output(), k)?;
        let precision = oracle.map(|truth| {
            let classes: Vec<usize> = u_rows.iter().map(|&r| truth[r]).collect();
            pseudo.precision(&classes)
        });

        let head_trace = self.model.cluster_head.forward_trace(enc_trace.output())?;
        let head_trace_bar = self
            .model
            .cluster_head
            .forward_trace(enc_trace_bar.output())?;

        let (clust, d_clust) = clustering_loss_grad(head_trace.output(), &pseudo)?;
        let (reg, d_reg_flat) = mse_grad(head_trace.output().data(), head_trace_bar.output().data())?;
        let d_reg = Matrix::from_vec(x_u.rows(), self.model.n_unknown(), d_reg_flat)?;

        let one = F::one();
        let mut d_out = d_clust;
        d_out.scale(w2);
        d_out.add_scaled(&d_reg, one - w2);
        let mut d_out_bar = d_reg;
        d_out_bar.scale(-(one - w2));

        let head_bp = self.model.cluster_head.backward_from(&head_trace, &d_out)?;
        let head_bp_bar = self
            .model
            .cluster_head
            .backward_from(&head_trace_bar, &d_out_bar)?;
        let mut head_tape = head_bp.tape;
        head_tape.accumulate(&head_bp_bar.tape);

        let enc_bp = self.model.encoder.backward_from(&enc_trace, &head_bp.d_input)?;
        let enc_bp_bar = self
            .model
            .encoder
            .backward_from(&enc_trace_bar, &head_bp_bar.d_input)?;
        let mut enc_tape = enc_bp.tape;
        enc_tape.accumulate(&enc_bp_bar.tape);

        self.opt_clust_head.step(&mut self.model.cluster_head, &head_tape)?;
        self.opt_clust_enc.step(&mut self.model.encoder, &enc_tape)?;
        Ok(Some((clust.to_f64().unwrap(), reg.to_f64().unwrap(), precision)))
    }

    /// One epoch of alternating updates over a fresh batch permutation.
    pub fn train_epoch(
        &mut self,
        split: &TrainSplit<F>,
        oracle: Option<&[usize]>,
    ) -> Result<EpochLog> {
        let n_known = self.model.n_known();
        let mut sums = EpochLog {
            epoch: self.epoch,
            l_class: 0.0,
            l_reg_classifier: 0.0,
            l_clust: 0.0,
            l_reg_cluster: 0.0,
            pseudo_precision: None,
            skipped_cluster_steps: 0,
            batch_pseudo_precisions: Vec::new(),
        };
        let mut n_class = 0usize;
        let mut n_clust = 0usize;
        let mut precision_sum = 0.0f64;
        let mut precision_n = 0usize;

        for indices in self.sampler.epoch() {
            let batch = assemble_batch(split, n_known, &indices);
            let (ce, reg_c) = self.classification_step(split, &batch)?;
            sums.l_class += ce;
            sums.l_reg_classifier += reg_c;
            n_class += 1;

            match self.clustering_step(split, &batch, oracle)? {
                Some((clust, reg_u, precision)) => {
                    sums.l_clust += clust;
                    sums.l_reg_cluster += reg_u;
                    n_clust += 1;
                    if let Some(p) = precision {
                        precision_sum += p;
                        precision_n += 1;
                        sums.batch_pseudo_precisions.push(p);
                    }
                }
                None => sums.skipped_cluster_steps += 1,
            }
        }

        if n_class > 0 {
            sums.l_class /= n_class as f64;
            sums.l_reg_classifier /= n_class as f64;
        }
        if n_clust > 0 {
            sums.l_clust /= n_clust as f64;
            sums.l_reg_cluster /= n_clust as f64;
        }
        if precision_n > 0 {
            sums.pseudo_precision = Some(precision_sum / precision_n as f64);
        }
        self.epoch += 1;
        Ok(sums)
    }
}
