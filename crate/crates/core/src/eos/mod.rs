//! Equations of state for ℓ1-regularised neighbourhood regression.
//!
//! The macroscopic parameters are found by damped Gauss–Seidel iteration in
//! the order E, F, R, Γ, K, χ, Q, H, η. The active-set part (E, F, J̄) comes
//! either from exact expectations over the neighbourhood marginal
//! (asymptotic mode) or from sample averages over Monte-Carlo replicates
//! (finite mode).

mod active;
mod gamma;
mod metrics;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::spectra::SpectralDensity;

pub use active::ActiveStats;
pub use gamma::{gamma_fixed_point, SpectralTerms, GAMMA_MAX_ITER};
pub use metrics::{inactive_threshold, predict_metrics, sample_inactive};
pub use solver::{solve, solve_linr_asymptotic, solve_linr_finite, solve_logr, EosSolution, Mode};

pub use crate::ising::neighborhood_expectation;

pub const DEFAULT_DAMP: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_T_MC: usize = 200;
pub const DEFAULT_HERMITE_ORDER: usize = 61;
/// Floor applied to H and Q when an iterate turns non-positive.
pub const CLAMP_FLOOR: f64 = 1e-12;

/// Θ = {χ, Q, E, R, F, η, K, H, Γ, J̄}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParams {
    pub chi: f64,
    pub q: f64,
    pub e: f64,
    pub f: f64,
    pub r: f64,
    pub eta: f64,
    pub k: f64,
    pub h: f64,
    pub gamma: f64,
    pub jbar: f64,
}

impl Default for OrderParams {
    fn default() -> Self {
        Self {
            chi: 1.0,
            q: 1.0,
            e: 1.0,
            f: 1.0,
            r: 1.0,
            eta: 1.0,
            k: 1.0,
            h: 1.0,
            gamma: 0.1,
            jbar: 0.0,
        }
    }
}

impl OrderParams {
    pub fn is_physical(&self) -> bool {
        [self.chi, self.q, self.r, self.h, self.f, self.k, self.eta]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
            && self.jbar.is_finite()
    }
}

/// Per-replicate active-set estimates Ĵ^t and residuals Δ^t.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActiveTrialSet {
    pub estimates: Vec<Vec<f64>>,
    pub deltas: Vec<f64>,
}

impl ActiveTrialSet {
    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// Mean over trials and coordinates.
    pub fn mean_coupling(&self) -> f64 {
        let (s, c) = self
            .estimates
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if c == 0 {
            0.0
        } else {
            s / c as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct EosProblem {
    pub loss: Loss,
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
    pub d: usize,
    pub k0: f64,
    pub density: SpectralDensity,
    pub t_mc: usize,
    pub damp: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub hermite_order: usize,
}

impl EosProblem {
    /// Problem on the analytic random-regular density with default settings.
    pub fn new(loss: Loss, m: usize, n: usize, lambda: f64, d: usize, k0: f64) -> Result<Self> {
        let density = SpectralDensity::build(d, k0)?;
        Self::with_density(loss, m, n, lambda, d, k0, density)
    }

    pub fn with_density(
        loss: Loss,
        m: usize,
        n: usize,
        lambda: f64,
        d: usize,
        k0: f64,
        density: SpectralDensity,
    ) -> Result<Self> {
        let p = Self {
            loss,
            m,
            n,
            lambda,
            d,
            k0,
            density,
            t_mc: DEFAULT_T_MC,
            damp: DEFAULT_DAMP,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
            hermite_order: DEFAULT_HERMITE_ORDER,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// λM/√N, the scale that enters the inactive-set equations.
    pub fn lambda_m_over_sqrt_n(&self) -> f64 {
        self.lambda * self.m as f64 / (self.n as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.m == 0 || self.n == 0 || self.t_mc == 0 {
            return Err(Error::Domain("M, N and T_MC must all be at least 1".into()));
        }
        if self.n <= self.d {
            return Err(Error::Domain(format!("need N > d, got N = {}, d = {}", self.n, self.d)));
        }
        if !(0.0..1.0).contains(&self.damp) {
            return Err(Error::Domain(format!("damping must lie in [0, 1), got {}", self.damp)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 || self.hermite_order == 0 {
            return Err(Error::Domain("tolerance, iteration cap and quadrature order must be positive".into()));
        }
        Ok(())
    }
}
