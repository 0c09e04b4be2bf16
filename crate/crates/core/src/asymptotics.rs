//! Closed-form high-dimensional results.

use serde::Serialize;

use crate::eos::OrderParams;
use crate::error::{Error, Result};
use crate::ising::NeighborhoodTable;
use crate::loss::Loss;
use crate::quadrature::standard_normal_rule;
use crate::special::erfc;

/// (d−1)·tanh²(K0); the model is paramagnetic when this is below one.
pub fn paramagnetic_value(d: usize, k0: f64) -> f64 {
    let t = k0.tanh();
    (d as f64 - 1.0) * t * t
}

pub fn paramagnetic_check(d: usize, k0: f64) -> bool {
    paramagnetic_value(d, k0) < 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityResult {
    pub loss: Loss,
    /// Sample-complexity constant c(λ, K0) = 2Δ.
    pub c: f64,
    /// c / λ², the critical coefficient of M = c0·log N.
    pub c0: f64,
    /// 2 / tanh²(K0).
    pub lower_bound_constant: f64,
    pub delta: f64,
}

fn check_lambda(lambda: f64, k0: f64) -> Result<()> {
    let t = k0.tanh().abs();
    if !(lambda > 0.0 && lambda < t) {
        return Err(Error::Domain(format!(
            "consistent selection needs 0 < lambda < tanh(K0) = {t:.6}, got lambda = {lambda}"
        )));
    }
    Ok(())
}

/// Δ for the quadratic loss in the χ → 0 limit.
pub fn quadratic_delta(lambda: f64, k0: f64, d: usize) -> f64 {
    let t2 = k0.tanh().powi(2);
    let df = d as f64;
    (1.0 - t2 + df * lambda * lambda) / (1.0 + (df - 1.0) * t2)
}

/// Sample complexity of ℓ1-LinR.
pub fn sample_complexity(lambda: f64, k0: f64, d: usize) -> Result<ComplexityResult> {
    sample_complexity_for(Loss::Quadratic, lambda, k0, d)
}

pub fn sample_complexity_for(loss: Loss, lambda: f64, k0: f64, d: usize) -> Result<ComplexityResult> {
    check_lambda(lambda, k0)?;
    let t2 = k0.tanh().powi(2);
    let delta = match loss {
        Loss::Quadratic => quadratic_delta(lambda, k0, d),
        Loss::Logistic => logr_delta_limit(lambda, k0, d)?,
    };
    let c = 2.0 * delta;
    Ok(ComplexityResult {
        loss,
        c,
        c0: c / (lambda * lambda),
        lower_bound_constant: 2.0 / t2,
        delta,
    })
}

/// FPR = erfc(λ·√(M/(2Δ))).
pub fn fpr_asymptotic(lambda: f64, m: f64, delta: f64) -> f64 {
    erfc(lambda * (m / (2.0 * delta)).sqrt())
}

const HERMITE_ORDER: usize = 61;

/// Δ = E_{s,z}(1 − tanh ŷ)² at the solved logistic order parameters.
pub fn logr_delta(k0: f64, d: usize, params: &OrderParams) -> Result<f64> {
    let table = NeighborhoodTable::new(d, k0)?;
    let rule = standard_normal_rule(HERMITE_ORDER);
    let sq = params.q.max(0.0).sqrt();
    let mut total = 0.0;
    for (state, &(m, p)) in table.aligned_distribution().iter().enumerate() {
        for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
            let a = sq * z + params.jbar * m;
            let y = Loss::Logistic
                .prox(a, params.chi)
                .ok_or(Error::ProxNewton { state, z })?;
            total += p * w * (1.0 - y.tanh()).powi(2);
        }
    }
    Ok(total)
}

/// J solving E[(1 − tanh(J·m))·m] = λd with m = s0·Σ s_j, i.e. the mean
/// logistic coupling when χ and Q vanish.
pub fn logr_limit_coupling(lambda: f64, k0: f64, d: usize) -> Result<f64> {
    let table = NeighborhoodTable::new(d, k0)?;
    let dist = table.aligned_distribution();
    let target = lambda * d as f64;
    let g = |j: f64| -> (f64, f64) {
        dist.iter().fold((0.0, 0.0), |(v, dv), &(m, p)| {
            let t = (j * m).tanh();
            (v + p * (1.0 - t) * m, dv - p * (1.0 - t * t) * m * m)
        })
    };
    Ok(crate::roots::decreasing_root(|j| {
        let (v, dv) = g(j);
        (v - target, dv)
    }, 0.0, 1.0))
}

/// Δ for the logistic loss in the χ, Q → 0 limit.
pub fn logr_delta_limit(lambda: f64, k0: f64, d: usize) -> Result<f64> {
    let j = logr_limit_coupling(lambda, k0, d)?;
    let table = NeighborhoodTable::new(d, k0)?;
    Ok(table
        .aligned_distribution()
        .iter()
        .map(|&(m, p)| p * (1.0 - (j * m).tanh()).powi(2))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn paramagnetic_examples() {
        assert!(paramagnetic_check(3, 0.4));
        assert_abs_diff_eq!(paramagnetic_value(3, 0.4), 2.0 * 0.4f64.tanh().powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(paramagnetic_value(3, 0.4), 0.2887, epsilon = 1e-4);
        assert!(!paramagnetic_check(3, 0.9));
        assert!(paramagnetic_check(2, 5.0));
    }

    #[test]
    fn critical_constants() {
        let r = sample_complexity(0.3, 0.4, 3).unwrap();
        assert_abs_diff_eq!(r.c0, 19.41, epsilon = 0.01);
        let r = sample_complexity(0.1, 0.4, 3).unwrap();
        assert_abs_diff_eq!(r.c0, 137.4, epsilon = 1.0);
        let t = 0.4f64.tanh();
        let near = sample_complexity(t * (1.0 - 1e-9), 0.4, 3).unwrap();
        assert_abs_diff_eq!(near.c0, near.lower_bound_constant, epsilon = 1e-6);
    }

    #[test]
    fn lambda_outside_consistency_window() {
        assert!(sample_complexity(0.0, 0.4, 3).is_err());
        assert!(sample_complexity(0.4f64.tanh(), 0.4, 3).is_err());
        assert!(sample_complexity(0.5, 0.4, 3).is_err());
    }

    #[test]
    fn fpr_limits() {
        assert_eq!(fpr_asymptotic(0.3, 0.0, 1.0), 1.0);
        let mut prev = 1.0;
        for m in [10.0, 100.0, 1000.0] {
            let f = fpr_asymptotic(0.3, m, 0.7);
            assert!(f < prev);
            prev = f;
        }
    }

    #[test]
    fn logistic_delta_near_zero_coupling() {
        // K0, λ → 0: ŷ ≈ 0 and Δ → 1.
        let delta = logr_delta_limit(1e-4, 2e-4, 3).unwrap();
        assert_abs_diff_eq!(delta, 1.0, epsilon = 1e-3);
        let r = sample_complexity_for(Loss::Logistic, 0.3, 0.4, 3).unwrap();
        let q = sample_complexity(0.3, 0.4, 3).unwrap();
        assert!(r.delta > 0.0);
        assert!((r.c0 - q.c0).abs() > 1e-3);
        assert!((r.c0 / q.c0 - 1.0).abs() < 0.5);
    }

    #[test]
    fn logistic_limit_coupling_is_stationary() {
        let j = logr_limit_coupling(0.3, 0.4, 3).unwrap();
        assert!(j > 0.0);
        let table = NeighborhoodTable::new(3, 0.4).unwrap();
        let g: f64 = table
            .aligned_distribution()
            .iter()
            .map(|&(m, p)| p * (1.0 - (j * m).tanh()) * m)
            .sum();
        assert_abs_diff_eq!(g, 0.9, epsilon = 1e-12);
        assert!(logr_limit_coupling(0.37, 0.4, 3).unwrap() > 0.0);
        assert_eq!(logr_limit_coupling(0.39, 0.4, 3).unwrap(), 0.0);
        assert_eq!(logr_limit_coupling(0.5, 0.4, 3).unwrap(), 0.0);
    }
}
