//! Minimal deterministic dense-network engine.
//!
//! Networks are stacks of affine layers with elementwise activations
//! (softmax allowed on the final layer only). The backward pass is analytic
//! and operates on a recorded [`ForwardTrace`], so gradients can be chained
//! across networks that share a latent space: backpropagate a head from its
//! loss gradient, then feed the returned input gradient into the encoder.

pub mod adam;
pub mod checkpoint;
pub mod loss;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Float;

use loss::LossKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Softmax,
}

/// One dense layer: `y = activation(W x + b)`, weights row-major `(out, in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<F> {
    weights: Matrix<F>,
    bias: Vec<F>,
    activation: Activation,
}

impl<F: Float> Layer<F> {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Matrix<F> {
        &self.weights
    }

    pub fn bias(&self) -> &[F] {
        &self.bias
    }
}

/// Shape request for one layer of a [`DenseNet`].
#[derive(Clone, Copy, Debug)]
pub struct LayerSpec {
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            out_dim,
            activation,
        }
    }
}

/// Stack of dense layers. Dimensions chain, parameters stay finite, and
/// softmax may appear only as the final activation.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet<F> {
    input_dim: usize,
    layers: Vec<Layer<F>>,
}

impl<F: Float> DenseNet<F> {
    /// Builds a network with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init
    /// for both weights and biases.
    pub fn new<R: Rng>(input_dim: usize, specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::config("network input_dim must be positive"));
        }
        if specs.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut in_dim = input_dim;
        for (li, spec) in specs.iter().enumerate() {
            if spec.out_dim == 0 {
                return Err(Error::config(format!("layer {li} out_dim must be positive")));
            }
            if spec.activation == Activation::Softmax && li + 1 != specs.len() {
                return Err(Error::config(
                    "softmax is only allowed as the final activation",
                ));
            }
            let limit = F::one() / F::of_usize(in_dim).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let mut weights = Matrix::zeros(spec.out_dim, in_dim);
            for w in weights.data_mut() {
                *w = dist.sample(rng);
            }
            let bias: Vec<F> = (0..spec.out_dim).map(|_| dist.sample(rng)).collect();
            layers.push(Layer {
                weights,
                bias,
                activation: spec.activation,
            });
            in_dim = spec.out_dim;
        }
        Ok(DenseNet { input_dim, layers })
    }

    /// Rebuilds a network from explicit parameters (checkpoint loading).
    pub fn from_layers(
        input_dim: usize,
        layers: Vec<(Matrix<F>, Vec<F>, Activation)>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        let mut built = Vec::with_capacity(layers.len());
        let mut in_dim = input_dim;
        let last = layers.len() - 1;
        for (li, (weights, bias, activation)) in layers.into_iter().enumerate() {
            if weights.cols() != in_dim {
                return Err(Error::config(format!(
                    "layer {li} expects input {} but previous layer produces {in_dim}",
                    weights.cols()
                )));
            }
            if bias.len() != weights.rows() {
                return Err(Error::config(format!("layer {li} bias length mismatch")));
            }
            if activation == Activation::Softmax && li != last {
                return Err(Error::config(
                    "softmax is only allowed as the final activation",
                ));
            }
            if !weights.all_finite() || !bias.iter().all(|v| v.is_finite()) {
                return Err(Error::data(format!("layer {li} has non-finite parameters")));
            }
            in_dim = weights.rows();
            built.push(Layer {
                weights,
                bias,
                activation,
            });
        }
        Ok(DenseNet {
            input_dim,
            layers: built,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, i: usize) -> &Layer<F> {
        &self.layers[i]
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<F>] {
        &mut self.layers
    }

    /// Total scalar parameter count.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.bias.len())
            .sum()
    }

    /// Reads parameter `i` in layer-major order: each layer's weights
    /// (row-major) followed by its biases.
    pub fn param(&self, mut i: usize) -> F {
        for layer in &self.layers {
            let w = layer.weights.data().len();
            if i < w {
                return layer.weights.data()[i];
            }
            i -= w;
            if i < layer.bias.len() {
                return layer.bias[i];
            }
            i -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Writes parameter `i` (same indexing as [`DenseNet::param`]).
    pub fn set_param(&mut self, mut i: usize, v: F) {
        for layer in &mut self.layers {
            let w = layer.weights.data().len();
            if i < w {
                layer.weights.data_mut()[i] = v;
                return;
            }
            i -= w;
            if i < layer.bias.len() {
                layer.bias[i] = v;
                return;
            }
            i -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Pure forward pass over a batch (one sample per row).
    pub fn forward(&self, batch: &Matrix<F>) -> Result<Matrix<F>> {
        Ok(self.forward_trace(batch)?.into_output())
    }

    /// Forward pass that records each layer's post-activation output for a
    /// later backward pass.
    pub fn forward_trace(&self, batch: &Matrix<F>) -> Result<ForwardTrace<F>> {
        if batch.cols() != self.input_dim {
            return Err(Error::config(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_dim
            )));
        }
        if !batch.all_finite() {
            return Err(Error::data("non-finite value in network input"));
        }
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut current = batch;
        for layer in &self.layers {
            let mut out = affine(layer, current);
            activate(layer.activation, &mut out);
            outputs.push(out);
            current = outputs.last().unwrap();
        }
        Ok(ForwardTrace {
            input: batch.clone(),
            outputs,
        })
    }

    /// Gradients of the mean loss with respect to every parameter.
    pub fn backward(
        &self,
        trace: &ForwardTrace<F>,
        loss_kind: LossKind,
        targets: &Matrix<F>,
    ) -> Result<GradientTape<F>> {
        let pred = trace.output();
        let (loss_value, d_output) = loss::loss_grad(loss_kind, pred, targets)?;
        let mut bp = self.backward_from(trace, &d_output)?;
        bp.tape.loss = loss_value;
        Ok(bp.tape)
    }

    /// Backpropagates an arbitrary output gradient through the network.
    ///
    /// Returns the parameter tape and the gradient with respect to the
    /// network input, which allows chaining through a shared encoder.
    pub fn backward_from(
        &self,
        trace: &ForwardTrace<F>,
        d_output: &Matrix<F>,
    ) -> Result<Backprop<F>> {
        let last = trace
            .outputs
            .last()
            .ok_or_else(|| Error::config("empty forward trace"))?;
        if d_output.rows() != last.rows() || d_output.cols() != last.cols() {
            return Err(Error::config("output gradient shape mismatch"));
        }
        if trace.outputs.len() != self.layers.len() || trace.input.cols() != self.input_dim {
            return Err(Error::config("forward trace does not match this network"));
        }

        let n = trace.input.rows();
        let mut tape = GradientTape::zeros_like(self);
        let mut upstream = d_output.clone();

        for (li, layer) in self.layers.iter().enumerate().rev() {
            let out = &trace.outputs[li];
            let d_z = activation_backward(layer.activation, out, &upstream);
            let input: &Matrix<F> = if li == 0 {
                &trace.input
            } else {
                &trace.outputs[li - 1]
            };

            let dw = &mut tape.d_weights[li];
            let db = &mut tape.d_bias[li];
            let mut d_in = Matrix::zeros(n, layer.in_dim());
            for r in 0..n {
                let dz_row = d_z.row(r);
                let in_row = input.row(r);
                let d_in_row = d_in.row_mut(r);
                for o in 0..layer.out_dim() {
                    let g = dz_row[o];
                    if g == F::zero() {
                        continue;
                    }
                    db[o] += g;
                    let w_row = layer.weights.row(o);
                    let dw_row = dw.row_mut(o);
                    for i in 0..layer.in_dim() {
                        dw_row[i] += g * in_row[i];
                        d_in_row[i] += w_row[i] * g;
                    }
                }
            }
            upstream = d_in;
        }

        Ok(Backprop {
            tape,
            d_input: upstream,
        })
    }
}

fn affine<F: Float>(layer: &Layer<F>, x: &Matrix<F>) -> Matrix<F> {
    let n = x.rows();
    let out_dim = layer.out_dim();
    let mut out = Matrix::zeros(n, out_dim);
    for r in 0..n {
        let x_row = x.row(r);
        let o_row = out.row_mut(r);
        for o in 0..out_dim {
            let w = layer.weights.row(o);
            let mut s = layer.bias[o];
            for (wi, xi) in w.iter().zip(x_row) {
                s += *wi * *xi;
            }
            o_row[o] = s;
        }
    }
    out
}

fn activate<F: Float>(activation: Activation, z: &mut Matrix<F>) {
    match activation {
        Activation::Identity => {}
        Activation::Relu => {
            for v in z.data_mut() {
                if *v < F::zero() {
                    *v = F::zero();
                }
            }
        }
        Activation::Sigmoid => {
            for v in z.data_mut() {
                *v = F::one() / (F::one() + (-*v).exp());
            }
        }
        Activation::Softmax => {
            for r in 0..z.rows() {
                let row = z.row_mut(r);
                let mut max = row[0];
                for v in row.iter() {
                    if *v > max {
                        max = *v;
                    }
                }
                let mut sum = F::zero();
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in row.iter_mut() {
                    *v /= sum;
                }
            }
        }
    }
}

/// dL/dz from dL/dy, using only the recorded post-activation output `y`.
fn activation_backward<F: Float>(
    activation: Activation,
    output: &Matrix<F>,
    upstream: &Matrix<F>,
) -> Matrix<F> {
    let mut d_z = upstream.clone();
    match activation {
        Activation::Identity => {}
        Activation::Relu => {
            for (dz, y) in d_z.data_mut().iter_mut().zip(output.data()) {
                if *y <= F::zero() {
                    *dz = F::zero();
                }
            }
        }
        Activation::Sigmoid => {
            for (dz, y) in d_z.data_mut().iter_mut().zip(output.data()) {
                *dz = *dz * *y * (F::one() - *y);
            }
        }
        Activation::Softmax => {
            // dz = y * (g - <g, y>) rowwise
            for r in 0..output.rows() {
                let y = output.row(r);
                let dz = d_z.row_mut(r);
                let mut dot = F::zero();
                for (g, yi) in dz.iter().zip(y) {
                    dot += *g * *yi;
                }
                for (g, yi) in dz.iter_mut().zip(y) {
                    *g = *yi * (*g - dot);
                }
            }
        }
    }
    d_z
}

/// Recorded activations from one forward pass; owning the trace is the
/// ticket for calling backward, so "backward without forward" cannot be
/// expressed.
#[derive(Clone, Debug)]
pub struct ForwardTrace<F> {
    input: Matrix<F>,
    outputs: Vec<Matrix<F>>,
}

impl<F: Float> ForwardTrace<F> {
    pub fn output(&self) -> &Matrix<F> {
        self.outputs.last().expect("trace has at least one layer")
    }

    pub fn into_output(mut self) -> Matrix<F> {
        self.outputs.pop().expect("trace has at least one layer")
    }
}

/// Per-parameter gradient buffers mirroring a network's shape.
#[derive(Clone, Debug)]
pub struct GradientTape<F> {
    pub d_weights: Vec<Matrix<F>>,
    pub d_bias: Vec<Vec<F>>,
    pub loss: F,
}

impl<F: Float> GradientTape<F> {
    pub fn zeros_like(net: &DenseNet<F>) -> Self {
        GradientTape {
            d_weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            d_bias: net.layers.iter().map(|l| vec![F::zero(); l.out_dim()]).collect(),
            loss: F::zero(),
        }
    }

    pub fn matches(&self, net: &DenseNet<F>) -> bool {
        self.d_weights.len() == net.layers.len()
            && self
                .d_weights
                .iter()
                .zip(&net.layers)
                .all(|(dw, l)| dw.rows() == l.out_dim() && dw.cols() == l.in_dim())
            && self
                .d_bias
                .iter()
                .zip(&net.layers)
                .all(|(db, l)| db.len() == l.out_dim())
    }

    /// Elementwise accumulate another tape (used to merge gradient paths).
    pub fn accumulate(&mut self, other: &GradientTape<F>) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            a.add_assign(b);
        }
        for (a, b) in self.d_bias.iter_mut().zip(&other.d_bias) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        self.loss += other.loss;
    }

    pub fn all_finite(&self) -> bool {
        self.d_weights.iter().all(|m| m.all_finite())
            && self.d_bias.iter().flatten().all(|v| v.is_finite())
    }
}

/// Result of backpropagating through one network.
pub struct Backprop<F> {
    pub tape: GradientTape<F>,
    /// Gradient with respect to the network input (chains into an encoder).
    pub d_input: Matrix<F>,
}
