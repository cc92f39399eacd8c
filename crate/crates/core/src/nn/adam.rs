//! Adam optimizer with bias-corrected moment estimates.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{DenseNet, GradientTape};
use crate::scalar::Float;

/// Adam state for one network. Moment buffers mirror the parameter shapes
/// and the step counter advances by exactly one per update.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    lr: F,
    beta1: F,
    beta2: F,
    epsilon: F,
    step: u64,
    m_weights: Vec<Matrix<F>>,
    v_weights: Vec<Matrix<F>>,
    m_bias: Vec<Vec<F>>,
    v_bias: Vec<Vec<F>>,
}

impl<F: Float> Adam<F> {
    pub fn new(net: &DenseNet<F>, lr: F) -> Self {
        let m_weights: Vec<Matrix<F>> = (0..net.num_layers())
            .map(|i| {
                let l = net.layer(i);
                Matrix::zeros(l.out_dim(), l.in_dim())
            })
            .collect();
        let m_bias: Vec<Vec<F>> = (0..net.num_layers())
            .map(|i| vec![F::zero(); net.layer(i).out_dim()])
            .collect();
        Adam {
            lr,
            beta1: F::c(0.9),
            beta2: F::c(0.999),
            epsilon: F::c(1e-8),
            step: 0,
            v_weights: m_weights.clone(),
            m_weights,
            v_bias: m_bias.clone(),
            m_bias,
        }
    }

    pub fn with_betas(mut self, beta1: F, beta2: F) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one Adam update from the tape's gradients.
    pub fn step(&mut self, net: &mut DenseNet<F>, tape: &GradientTape<F>) -> Result<()> {
        if !tape.matches(net) {
            return Err(Error::config("gradient tape shape does not match network"));
        }
        if !tape.all_finite() {
            return Err(Error::diverged(format!(
                "non-finite gradient at optimizer step {}",
                self.step + 1
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let one = F::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);

        for (li, layer) in net.layers_mut().iter_mut().enumerate() {
            let dw = &tape.d_weights[li];
            let mw = &mut self.m_weights[li];
            let vw = &mut self.v_weights[li];
            for o in 0..dw.rows() {
                let dw_row = dw.row(o);
                let mw_row = mw.row_mut(o);
                for (m, &g) in mw_row.iter_mut().zip(dw_row) {
                    *m = self.beta1 * *m + (one - self.beta1) * g;
                }
                let vw_row = vw.row_mut(o);
                for (v, &g) in vw_row.iter_mut().zip(dw_row) {
                    *v = self.beta2 * *v + (one - self.beta2) * g * g;
                }
            }
            for o in 0..layer.weights.rows() {
                let m_row = self.m_weights[li].row(o);
                let v_row = self.v_weights[li].row(o);
                let w_row = layer.weights.row_mut(o);
                for ((w, &m), &v) in w_row.iter_mut().zip(m_row).zip(v_row) {
                    let m_hat = m / bc1;
                    let v_hat = v / bc2;
                    *w -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
                }
            }

            let db = &tape.d_bias[li];
            let mb = &mut self.m_bias[li];
            let vb = &mut self.v_bias[li];
            for ((b, (m, v)), &g) in layer
                .bias
                .iter_mut()
                .zip(mb.iter_mut().zip(vb.iter_mut()))
                .zip(db)
            {
                *m = self.beta1 * *m + (one - self.beta1) * g;
                *v = self.beta2 * *v + (one - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *b -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
