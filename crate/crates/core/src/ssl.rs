//! Self-supervised encoder pretraining on all training rows, labels unseen.
//!
//! Each batch is corrupted cell-wise: with probability `p_m` a cell is
//! replaced by the value another (uniformly drawn) training row holds in
//! the same column. Two heads sit on the encoder latent: a sigmoid mask
//! estimator recovering which cells were corrupted (BCE) and an identity
//! reconstructor recovering the original values (MSE, weighted by alpha).
//! The heads are discarded afterwards; only the encoder persists.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::BatchSampler;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::adam::Adam;
use crate::nn::loss::{bce_grad, mse_grad};
use crate::nn::{Activation, DenseNet, LayerSpec};
use crate::rng::seeded;
use crate::scalar::Float;

/// A corrupted batch: `x_tilde` equals `x` where the mask is 0 and a value
/// drawn from the same column of the training set where the mask is 1.
pub struct CorruptionBatch<F> {
    pub x: Matrix<F>,
    pub mask: Matrix<F>,
    pub x_tilde: Matrix<F>,
}

/// Cell-wise corruption with independent Bernoulli(p_m) draws.
pub fn corrupt<F: Float, R: Rng>(
    x_batch: &Matrix<F>,
    full_train_x: &Matrix<F>,
    p_m: f64,
    rng: &mut R,
) -> CorruptionBatch<F> {
    debug_assert!(p_m > 0.0 && p_m < 1.0, "p_m must lie in (0, 1)");
    debug_assert!(full_train_x.rows() > 0);
    let n_pool = full_train_x.rows();
    let mut mask = Matrix::zeros(x_batch.rows(), x_batch.cols());
    let mut x_tilde = x_batch.clone();
    for r in 0..x_batch.rows() {
        for c in 0..x_batch.cols() {
            if rng.gen::<f64>() < p_m {
                mask[(r, c)] = F::one();
                let donor = rng.gen_range(0..n_pool);
                x_tilde[(r, c)] = full_train_x[(donor, c)];
            }
        }
    }
    CorruptionBatch {
        x: x_batch.clone(),
        mask,
        x_tilde,
    }
}

/// The two pretraining heads on top of the encoder latent.
pub struct SslHeads<F> {
    pub mask_estimator: DenseNet<F>,
    pub reconstructor: DenseNet<F>,
}

impl<F: Float> SslHeads<F> {
    /// One dense layer each: latent -> d sigmoid, latent -> d identity.
    pub fn new<R: Rng>(latent_dim: usize, input_dim: usize, rng: &mut R) -> Result<Self> {
        Ok(SslHeads {
            mask_estimator: DenseNet::new(
                latent_dim,
                &[LayerSpec::new(input_dim, Activation::Sigmoid)],
                rng,
            )?,
            reconstructor: DenseNet::new(
                latent_dim,
                &[LayerSpec::new(input_dim, Activation::Identity)],
                rng,
            )?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SslConfig {
    pub epochs: usize,
    pub p_m: f64,
    pub alpha: f64,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for SslConfig {
    fn default() -> Self {
        SslConfig {
            epochs: 30,
            p_m: 0.3,
            alpha: 2.0,
            lr: 1e-3,
            batch_size: 512,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SslEpochLog {
    pub epoch: usize,
    pub total: f64,
    pub mask_bce: f64,
    pub recon_mse: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PretrainLog {
    pub seed: u64,
    pub epochs: Vec<SslEpochLog>,
}

/// Pretrains encoder and heads in place on `train_x` (no labels anywhere).
pub fn ssl_pretrain<F: Float>(
    encoder: &mut DenseNet<F>,
    heads: &mut SslHeads<F>,
    train_x: &Matrix<F>,
    cfg: &SslConfig,
    seed: u64,
) -> Result<PretrainLog> {
    if encoder.input_dim() != train_x.cols() {
        return Err(Error::config(format!(
            "encoder expects {} inputs, data has {} columns",
            encoder.input_dim(),
            train_x.cols()
        )));
    }
    if !(cfg.p_m > 0.0 && cfg.p_m < 1.0) {
        return Err(Error::config(format!("p_m {} must lie in (0, 1)", cfg.p_m)));
    }
    let lr = F::c(cfg.lr);
    let alpha = F::c(cfg.alpha);
    let mut opt_enc = Adam::new(encoder, lr);
    let mut opt_mask = Adam::new(&heads.mask_estimator, lr);
    let mut opt_rec = Adam::new(&heads.reconstructor, lr);
    let mut sampler = BatchSampler::new(
        train_x.rows(),
        cfg.batch_size.min(train_x.rows()).max(2),
        crate::rng::derive_seed(seed, "ssl-sampler"),
    )?;
    let mut corrupt_rng = seeded(seed, "ssl-corrupt");

    let mut log = PretrainLog {
        seed,
        epochs: Vec::with_capacity(cfg.epochs),
    };

    for epoch in 0..cfg.epochs {
        let mut sum_total = 0.0f64;
        let mut sum_bce = 0.0f64;
        let mut sum_mse = 0.0f64;
        let mut batches = 0usize;
        for indices in sampler.epoch() {
            let x = train_x.select_rows(&indices);
            let batch = corrupt(&x, train_x, cfg.p_m, &mut corrupt_rng);

            let enc_trace = encoder.forward_trace(&batch.x_tilde)?;
            let z = enc_trace.output().clone();

            let mask_trace = heads.mask_estimator.forward_trace(&z)?;
            let (bce_val, d_mask_flat) =
                bce_grad(mask_trace.output().data(), batch.mask.data())?;
            let d_mask = Matrix::from_vec(z.rows(), batch.x.cols(), d_mask_flat)?;

            let rec_trace = heads.reconstructor.forward_trace(&z)?;
            let (mse_val, d_rec_flat) = mse_grad(rec_trace.output().data(), batch.x.data())?;
            let mut d_rec = Matrix::from_vec(z.rows(), batch.x.cols(), d_rec_flat)?;
            d_rec.scale(alpha);

            let mask_bp = heads.mask_estimator.backward_from(&mask_trace, &d_mask)?;
            let rec_bp = heads.reconstructor.backward_from(&rec_trace, &d_rec)?;

            let mut d_z = mask_bp.d_input;
            d_z.add_assign(&rec_bp.d_input);
            let enc_bp = encoder.backward_from(&enc_trace, &d_z)?;

            opt_mask.step(&mut heads.mask_estimator, &mask_bp.tape)?;
            opt_rec.step(&mut heads.reconstructor, &rec_bp.tape)?;
            opt_enc.step(encoder, &enc_bp.tape)?;

            let bce_f = bce_val.to_f64().unwrap();
            let mse_f = mse_val.to_f64().unwrap();
            let total = bce_f + cfg.alpha * mse_f;
            if !total.is_finite() {
                return Err(Error::diverged(format!(
                    "ssl loss became non-finite at epoch {epoch}"
                )));
            }
            sum_bce += bce_f;
            sum_mse += mse_f;
            sum_total += total;
            batches += 1;
        }
        log.epochs.push(SslEpochLog {
            epoch,
            total: sum_total / batches as f64,
            mask_bce: sum_bce / batches as f64,
            recon_mse: sum_mse / batches as f64,
        });
    }
    Ok(log)
}
