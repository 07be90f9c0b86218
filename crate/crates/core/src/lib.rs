//! Meta-Thompson Sampling for linear contextual bandits, with a waveform-agile
//! radar tracking simulator and a Monte Carlo experiment harness.
//!
//! The numerical core ([`gaussian`], [`bandit`], [`meta`], [`linalg`]) is
//! generic over the [`Scalar`] type; the radar environment and harness run in
//! `f64`.

pub mod bandit;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod linalg;
pub mod meta;
pub mod radar;
pub mod rng;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Gaussian64 = gaussian::Gaussian<f64>;
pub type Gaussian32 = gaussian::Gaussian<f32>;
pub type LinearPosterior64 = gaussian::LinearPosterior<f64>;
pub type LinearPosterior32 = gaussian::LinearPosterior<f32>;
pub type MetaPosterior64 = meta::MetaPosterior<f64>;
pub type MetaPosterior32 = meta::MetaPosterior<f32>;
pub type AgentState64 = bandit::AgentState<f64>;
pub type ContextSet64 = bandit::ContextSet<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
