//! TabularNCD: novel class discovery for tabular data.
//!
//! Given a labeled set of known classes and an unlabeled set drawn from
//! disjoint unknown classes, this crate pretrains a dense encoder with
//! masked self-supervision, then jointly trains a supervised classifier and
//! a pseudo-labeled clustering head over the shared latent space to recover
//! the unknown classes. Ships with the evaluation protocol (Hungarian-
//! aligned accuracy, NMI, ARI) and the k-means / supervised-projection
//! baselines used for comparison.
//!
//! All numeric code is generic over [`scalar::Float`] (`f32` or `f64`);
//! concrete `f64` aliases are exported at the crate root.

pub mod augment;
pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod joint;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod pseudo;
pub mod rng;
pub mod scalar;
pub mod ssl;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Float;

/// Default scalar type for experiments.
pub type Real = f64;

pub type MatrixF64 = matrix::Matrix<f64>;
pub type MatrixF32 = matrix::Matrix<f32>;
pub type DenseNetF64 = nn::DenseNet<f64>;
pub type DenseNetF32 = nn::DenseNet<f32>;
pub type JointModelF64 = joint::JointModel<f64>;
pub type TrainerF64 = joint::Trainer<f64>;
pub type DatasetF64 = data::NcdDataset<f64>;
