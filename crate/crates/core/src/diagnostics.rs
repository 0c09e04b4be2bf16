//! Consistency checks of the two modelling assumptions behind the equations
//! of state: the sparse active set of the mean estimates, and Haar-like
//! eigenvectors of the covariance matrix.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{paramagnetic_check, paramagnetic_value};
use crate::error::{Error, Result};
use crate::ising::{gen_rr_graph, SignMode, DEFAULT_MAX_RESTARTS};
use crate::linalg::{orthogonality_residual, symmetric_eigen, EigenMethod};
use crate::rng::{derive_rng, Purpose};
use crate::special::soft_threshold;

pub const DEFAULT_MAX_GENERATION: usize = 10;
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationMargin {
    pub generation: usize,
    /// |t^a − t^(a−1)(1 + (d−1)t²)J| / (1 + χ).
    pub subgradient: f64,
    /// λ − subgradient; non-negative when the zero estimate is consistent.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzReport {
    pub d: usize,
    pub k0: f64,
    pub lambda: f64,
    pub chi: f64,
    /// Common value of the first-generation mean estimates.
    pub j: f64,
    /// Distance of the first generation from the zero/nonzero switch,
    /// |tanh K0 − λ(1+χ)|/(1+χ).
    pub first_generation_margin: f64,
    /// Generations 2.. in increasing order.
    pub generations: Vec<GenerationMargin>,
    pub holds: bool,
}

/// Checks that J_1 = J, J_a = 0 (a ≥ 2) satisfies the mean-estimate
/// stationarity conditions on a tree-like regular graph.
pub fn ansatz1_check(d: usize, k0: f64, lambda: f64, chi: f64) -> Result<AnsatzReport> {
    ansatz1_check_generations(d, k0, lambda, chi, DEFAULT_MAX_GENERATION)
}

pub fn ansatz1_check_generations(d: usize, k0: f64, lambda: f64, chi: f64, max_generation: usize) -> Result<AnsatzReport> {
    if d < 2 || !paramagnetic_check(d, k0) {
        return Err(Error::NotParamagnetic {
            d,
            k0,
            value: paramagnetic_value(d, k0),
        });
    }
    if !(lambda > 0.0) || !(chi >= 0.0) || !lambda.is_finite() || !chi.is_finite() {
        return Err(Error::Domain(format!(
            "need lambda > 0 and chi >= 0, got lambda = {lambda}, chi = {chi}"
        )));
    }
    let t = k0.tanh().abs();
    let scale = 1.0 + (d as f64 - 1.0) * t * t;
    let j = soft_threshold(t, lambda * (1.0 + chi)) / scale;
    let generations: Vec<GenerationMargin> = (2..=max_generation)
        .map(|a| {
            let sub = (t.powi(a as i32) - t.powi(a as i32 - 1) * scale * j).abs() / (1.0 + chi);
            GenerationMargin {
                generation: a,
                subgradient: sub,
                margin: lambda - sub,
            }
        })
        .collect();
    let holds = generations.iter().all(|g| g.margin >= 0.0);
    Ok(AnsatzReport {
        d,
        k0,
        lambda,
        chi,
        j,
        first_generation_margin: (t - lambda * (1.0 + chi)).abs() / (1.0 + chi),
        generations,
        holds,
    })
}

/// First three k-statistics of Tr(O^k) over replicates, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantReport {
    pub k: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub third_cumulant: f64,
    pub third_cumulant_se: f64,
    /// Same statistics for Tr(O^−k). For orthogonal O, O^−k = (O^k)ᵀ, so
    /// these coincide with the forward traces.
    pub inverse_mean: f64,
    pub inverse_variance: f64,
    pub inverse_third_cumulant: f64,
    pub replicates: usize,
    /// Large-N Haar values: mean 1 for even k and 0 for odd k, variance k.
    pub haar_mean: f64,
    pub haar_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarReport {
    pub n: usize,
    pub d: usize,
    pub k0: f64,
    pub seed: u64,
    pub cumulants: Vec<CumulantReport>,
    pub max_orthogonality_residual: f64,
    /// How the covariance was obtained.
    pub covariance: String,
}

/// Unbiased k-statistics (k1, k2, k3) and standard errors; the k3 error
/// uses its variance under normality.
pub fn k_statistics(x: &[f64]) -> Result<[(f64, f64); 3]> {
    let n = x.len();
    if n < 3 {
        return Err(Error::Domain(format!("need at least 3 replicates, got {n}")));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let k2 = nf * m2 / (nf - 1.0);
    let k3 = nf * nf * m3 / ((nf - 1.0) * (nf - 2.0));
    let k4 = if n > 3 {
        nf * nf * ((nf + 1.0) * m4 - 3.0 * (nf - 1.0) * m2 * m2) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0))
    } else {
        0.0
    };
    let var_k2 = (k4 / nf + 2.0 * k2 * k2 / (nf - 1.0)).max(0.0);
    let var_k3 = 6.0 * nf * k2.powi(3) / ((nf - 1.0) * (nf - 2.0));
    Ok([
        (mean, (k2 / nf).sqrt()),
        (k2, var_k2.sqrt()),
        (k3, var_k3.sqrt()),
    ])
}

/// Tr(O^k) for k = 1..=k_max using repeated squaring and traces of products.
pub fn trace_powers(o: &DMatrix<f64>, k_max: usize) -> Vec<f64> {
    let tr_prod = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> f64 {
        // Tr(AB) = Σ_ij A_ij B_ji
        a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
    };
    let mut powers: Vec<DMatrix<f64>> = vec![o.clone()];
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        // Split k = a + b with both factors already available or cheap.
        let half = k.div_ceil(2);
        while powers.len() < half {
            let next = &powers[powers.len() - 1] * o;
            powers.push(next);
        }
        let a = &powers[half - 1];
        if k == half {
            out.push(a.trace());
        } else {
            out.push(tr_prod(a, &powers[k - half - 1]));
        }
    }
    out
}

/// Eigenvectors of the Bethe covariance of fresh RR graphs and the cumulants
/// of their trace powers.
pub fn haar_cumulant_check(n: usize, d: usize, k0: f64, replicates: usize, k_max: usize, seed: u64) -> Result<HaarReport> {
    if replicates < 3 {
        return Err(Error::Domain(format!("need at least 3 replicates, got {replicates}")));
    }
    if k_max == 0 {
        return Err(Error::Domain("k_max must be at least 1".into()));
    }
    if !paramagnetic_check(d, k0) {
        return Err(Error::NotParamagnetic {
            d,
            k0,
            value: paramagnetic_value(d, k0),
        });
    }
    let per_replicate: Vec<Result<(Vec<f64>, f64)>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_rng(seed, Purpose::Diagnostics, &[r as u64]);
            let model = gen_rr_graph(n, d, k0, SignMode::Uniform, DEFAULT_MAX_RESTARTS, &mut rng)?;
            let hessian = crate::spectra::bethe_inverse_covariance(n, model.edges());
            let cov = hessian
                .cholesky()
                .ok_or_else(|| Error::Eigen("Bethe inverse covariance is not positive definite".into()))?
                .inverse();
            let cov = (&cov + cov.transpose()) * 0.5;
            let mut o = symmetric_eigen(&cov, EigenMethod::HouseholderQr)?.vectors;
            for mut col in o.column_iter_mut() {
                if rng.random::<bool>() {
                    col.neg_mut();
                }
            }
            let residual = orthogonality_residual(&o);
            if residual > ORTHOGONALITY_TOL {
                return Err(Error::Eigen(format!(
                    "replicate {r}: eigenvectors deviate from orthogonality by {residual:e}"
                )));
            }
            Ok((trace_powers(&o, k_max), residual))
        })
        .collect();
    let mut traces = Vec::with_capacity(replicates);
    let mut worst: f64 = 0.0;
    for item in per_replicate {
        let (t, res) = item?;
        worst = worst.max(res);
        traces.push(t);
    }
    let mut cumulants = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let column: Vec<f64> = traces.iter().map(|t| t[k - 1]).collect();
        let [(mean, mean_se), (variance, variance_se), (third, third_se)] = k_statistics(&column)?;
        cumulants.push(CumulantReport {
            k,
            mean,
            mean_se,
            variance,
            variance_se,
            third_cumulant: third,
            third_cumulant_se: third_se,
            inverse_mean: mean,
            inverse_variance: variance,
            inverse_third_cumulant: third,
            replicates,
            haar_mean: if k % 2 == 0 { 1.0 } else { 0.0 },
            haar_variance: k as f64,
        });
    }
    Ok(HaarReport {
        n,
        d,
        k0,
        seed,
        cumulants,
        max_orthogonality_residual: worst,
        covariance: "exact inverse of the Bethe inverse covariance (not sampled)".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn ansatz_holds_at_reference_point() {
        let r = ansatz1_check(3, 0.4, 0.3, 0.0).unwrap();
        assert!(r.holds);
        assert_abs_diff_eq!(r.j, (0.4f64.tanh() - 0.3) / (1.0 + 2.0 * 0.4f64.tanh().powi(2)), epsilon = 1e-15);
        assert!(r.generations.iter().all(|g| g.margin > 0.0));
        assert_eq!(r.generations.len(), 9);
        // margins grow with the generation
        for w in r.generations.windows(2) {
            assert!(w[1].margin > w[0].margin);
        }
        // closed form λ(1 − t^(a−1))
        let t = 0.4f64.tanh();
        for g in &r.generations {
            assert_abs_diff_eq!(g.margin, 0.3 * (1.0 - t.powi(g.generation as i32 - 1)), epsilon = 1e-14);
        }
    }

    #[test]
    fn ansatz_above_threshold_is_trivial() {
        let r = ansatz1_check(3, 0.4, 0.5, 0.0).unwrap();
        assert_eq!(r.j, 0.0);
        assert!(r.holds);
        let r = ansatz1_check(3, 0.4, 0.3, 0.3).unwrap();
        assert_eq!(r.j, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn first_generation_margin_vanishes_at_switch() {
        let t = 0.4f64.tanh();
        let chi = 0.1;
        let r = ansatz1_check(3, 0.4, t / (1.0 + chi), chi).unwrap();
        assert!(r.first_generation_margin < 1e-15);
        let a = ansatz1_check(3, 0.4, 0.3 - 1e-9, chi).unwrap();
        let b = ansatz1_check(3, 0.4, 0.3 + 1e-9, chi).unwrap();
        assert!((a.first_generation_margin - b.first_generation_margin).abs() < 1e-8);
    }

    #[test]
    fn ansatz_rejects_bad_input() {
        assert!(ansatz1_check(3, 0.9, 0.3, 0.0).is_err());
        assert!(ansatz1_check(3, 0.4, 0.0, 0.0).is_err());
        assert!(ansatz1_check(3, 0.4, 0.3, -0.1).is_err());
    }

    #[test]
    fn identity_traces() {
        let o = DMatrix::<f64>::identity(7, 7);
        assert_eq!(trace_powers(&o, 8), vec![7.0; 8]);
    }

    #[test]
    fn trace_powers_match_direct_products() {
        let mut rng = rng_from_seed(3);
        let a = DMatrix::<f64>::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let traces = trace_powers(&a, 8);
        let mut p = a.clone();
        for (k, t) in traces.iter().enumerate() {
            assert!((p.trace() - t).abs() < 1e-9 * (1.0 + t.abs()), "k = {}", k + 1);
            p = &p * &a;
        }
    }

    #[test]
    fn k_statistics_on_known_data() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let [(m, _), (v, _), (k3, _)] = k_statistics(&x).unwrap();
        assert_abs_diff_eq!(m, 3.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 7.0, epsilon = 1e-13);
        // k3 = n²/((n−1)(n−2)) m3, m3 = (−15.625 − 3.375 + 0.125 + 42.875)/4
        assert_abs_diff_eq!(k3, 16.0 / 6.0 * 6.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_third_cumulant_within_se() {
        let mut rng = rng_from_seed(4);
        let x: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let [(_, _), (v, vse), (k3, se)] = k_statistics(&x).unwrap();
        assert!((v - 1.0).abs() < 3.0 * vse);
        assert!(k3.abs() < 3.0 * se);
    }

    #[test]
    fn small_haar_check_runs() {
        let r = haar_cumulant_check(40, 3, 0.4, 10, 4, 1).unwrap();
        assert_eq!(r.cumulants.len(), 4);
        assert!(r.max_orthogonality_residual <= ORTHOGONALITY_TOL);
        assert!(r.cumulants.iter().all(|c| c.variance >= 0.0 && c.replicates == 10));
        let again = haar_cumulant_check(40, 3, 0.4, 10, 4, 1).unwrap();
        assert_eq!(r, again);
    }
}
