//! Pinball-loss twin support vector machines, with and without privileged
//! information, plus the quadratic-programming solvers and evaluation tools
//! they need.
//!
//! Every numeric type is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the scalar to `f64`, and the `f32` variants carry a
//! `32` suffix.

// NaN-rejecting comparisons such as `!(x > 0)` are deliberate throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dual;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod pca;
pub mod qp;
pub mod scalar;
pub mod solver;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset = data::Dataset<f64>;
pub type Hyperparams = data::Hyperparams<f64>;
pub type GeneralQP = qp::GeneralQP<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type Model = trainer::Model<f64>;
pub type Classifier = trainer::Classifier<f64>;
pub type PcaBasis = pca::PcaBasis<f64>;

pub type Dataset32 = data::Dataset<f32>;
pub type Hyperparams32 = data::Hyperparams<f32>;
pub type GeneralQP32 = qp::GeneralQP<f32>;
pub type SolverConfig32 = solver::SolverConfig<f32>;
pub type Model32 = trainer::Model<f32>;
pub type Classifier32 = trainer::Classifier<f32>;
pub type PcaBasis32 = pca::PcaBasis<f32>;
