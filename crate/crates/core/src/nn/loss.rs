//! Loss primitives: cross-entropy, binary cross-entropy, mean squared error.
//!
//! All losses are means over the batch, probabilities are clamped at
//! `LOG_CLAMP` before any log, and each `*_grad` variant returns the
//! gradient with respect to the prediction alongside the value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Float;

/// Lower clamp applied to probabilities before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Bce,
    Mse,
}

/// One-hot encodes integer targets into an `n x n_classes` matrix.
pub fn one_hot<F: Float>(targets: &[usize], n_classes: usize) -> Result<Matrix<F>> {
    let mut out = Matrix::zeros(targets.len(), n_classes);
    for (r, &t) in targets.iter().enumerate() {
        if t >= n_classes {
            return Err(Error::config(format!(
                "target class {t} out of range for {n_classes} classes"
            )));
        }
        out[(r, t)] = F::one();
    }
    Ok(out)
}

/// Mean over rows of `-sum_c y_c log(pred_c)`.
pub fn cross_entropy<F: Float>(pred: &Matrix<F>, targets: &Matrix<F>) -> Result<F> {
    Ok(cross_entropy_grad(pred, targets)?.0)
}

pub fn cross_entropy_grad<F: Float>(
    pred: &Matrix<F>,
    targets: &Matrix<F>,
) -> Result<(F, Matrix<F>)> {
    if pred.rows() != targets.rows() || pred.cols() != targets.cols() {
        return Err(Error::config("cross-entropy shape mismatch"));
    }
    if pred.rows() == 0 {
        return Err(Error::config("cross-entropy on empty batch"));
    }
    let clamp = F::c(LOG_CLAMP);
    let n = F::of_usize(pred.rows());
    let mut loss = F::zero();
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    for ((g, p), t) in grad
        .data_mut()
        .iter_mut()
        .zip(pred.data())
        .zip(targets.data())
    {
        if *t == F::zero() {
            continue;
        }
        let clamped = if *p < clamp { clamp } else { *p };
        loss -= *t * clamped.ln();
        // log is flat below the clamp, so no gradient flows from there
        if *p >= clamp {
            *g = -*t / (*p * n);
        }
    }
    Ok((loss / n, grad))
}

/// Mean of `-t log p - (1 - t) log(1 - p)` over all entries.
pub fn bce<F: Float>(pred: &[F], target: &[F]) -> Result<F> {
    Ok(bce_grad(pred, target)?.0)
}

pub fn bce_grad<F: Float>(pred: &[F], target: &[F]) -> Result<(F, Vec<F>)> {
    if pred.len() != target.len() {
        return Err(Error::config("bce length mismatch"));
    }
    if pred.is_empty() {
        return Err(Error::config("bce on empty input"));
    }
    let clamp = F::c(LOG_CLAMP);
    let m = F::of_usize(pred.len());
    let one = F::one();
    let mut loss = F::zero();
    let mut grad = vec![F::zero(); pred.len()];
    for ((g, &p), &t) in grad.iter_mut().zip(pred).zip(target) {
        let p_pos = if p < clamp { clamp } else { p };
        let p_neg = if one - p < clamp { clamp } else { one - p };
        loss -= t * p_pos.ln() + (one - t) * p_neg.ln();
        let mut d = F::zero();
        if p >= clamp {
            d -= t / p;
        }
        if one - p >= clamp {
            d += (one - t) / (one - p);
        }
        *g = d / m;
    }
    Ok((loss / m, grad))
}

/// Mean of `(a - b)^2` over all entries (no 1/2 factor).
pub fn mse<F: Float>(a: &[F], b: &[F]) -> Result<F> {
    if a.len() != b.len() {
        return Err(Error::config("mse length mismatch"));
    }
    if a.is_empty() {
        return Err(Error::config("mse on empty input"));
    }
    let m = F::of_usize(a.len());
    let mut s = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    Ok(s / m)
}

/// MSE plus its gradient with respect to the first argument: `2 (a - b) / m`.
pub fn mse_grad<F: Float>(a: &[F], b: &[F]) -> Result<(F, Vec<F>)> {
    let loss = mse(a, b)?;
    let m = F::of_usize(a.len());
    let two = F::c(2.0);
    let grad = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| two * (x - y) / m)
        .collect();
    Ok((loss, grad))
}

/// Dispatches a loss over matrices: value plus dL/d(pred).
pub fn loss_grad<F: Float>(
    kind: LossKind,
    pred: &Matrix<F>,
    targets: &Matrix<F>,
) -> Result<(F, Matrix<F>)> {
    match kind {
        LossKind::CrossEntropy => cross_entropy_grad(pred, targets),
        LossKind::Bce => {
            if pred.rows() != targets.rows() || pred.cols() != targets.cols() {
                return Err(Error::config("bce shape mismatch"));
            }
            let (loss, grad) = bce_grad(pred.data(), targets.data())?;
            Ok((loss, Matrix::from_vec(pred.rows(), pred.cols(), grad)?))
        }
        LossKind::Mse => {
            if pred.rows() != targets.rows() || pred.cols() != targets.cols() {
                return Err(Error::config("mse shape mismatch"));
            }
            let (loss, grad) = mse_grad(pred.data(), targets.data())?;
            Ok((loss, Matrix::from_vec(pred.rows(), pred.cols(), grad)?))
        }
    }
}
