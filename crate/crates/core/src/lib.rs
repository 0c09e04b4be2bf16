//! Replica equations of state and matched Monte-Carlo experiments for
//! ℓ1-regularised Ising model selection.

pub mod asymptotics;
pub mod diagnostics;
pub mod eos;
pub mod harness;
pub mod estimators;
pub mod error;
pub mod ising;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod special;
pub mod spectra;

pub use error::{Error, Result};
