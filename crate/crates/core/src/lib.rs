//! Learning Lipschitz-constrained linear feedback from expert demonstrations
//! and certifying its closed-loop regret and robustness.
//!
//! The numerical core is generic over the scalar type ([`Scalar`], implemented
//! for `f32` and `f64`); the `*64` aliases below are what most callers want.
//!
//! Module map:
//! - [`state_space`]: plants, linear feedback, perturbed rollouts
//! - [`expert`]: discounted LQR experts and demonstration datasets
//! - [`policy_learning`]: spectral-norm constrained behavioural cloning
//! - [`evaluation`]: value matrices, nominal regret, robustness regret
//! - [`certificates`]: Lipschitz constants, bounds, stability certificates

// `!(x > 0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod error;
pub mod evaluation;
pub mod expert;
pub mod linalg;
pub mod policy_learning;
pub mod scalar;
pub mod state_space;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type LinearSystem64 = state_space::LinearSystem<f64>;
pub type LinearPolicy64 = state_space::LinearPolicy<f64>;
pub type PerturbationModel64 = state_space::PerturbationModel<f64>;
pub type Trajectory64 = state_space::Trajectory<f64>;
pub type QuadraticCost64 = expert::QuadraticCost<f64>;
pub type DemoSet64 = expert::DemoSet<f64>;
pub type FitConfig64 = policy_learning::FitConfig<f64>;
pub type FitResult64 = policy_learning::FitResult<f64>;
pub type ValueMatrix64 = evaluation::ValueMatrix<f64>;
pub type RegretEstimate64 = evaluation::RegretEstimate<f64>;
pub type CertificateReport64 = certificates::CertificateReport<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type LinearSystem32 = state_space::LinearSystem<f32>;
pub type LinearPolicy32 = state_space::LinearPolicy<f32>;
pub type QuadraticCost32 = expert::QuadraticCost<f32>;
