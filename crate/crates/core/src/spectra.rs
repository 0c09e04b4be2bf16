//! Eigenvalue densities of the Ising covariance matrix.
//!
//! For a d-regular tree-like graph with uniform coupling K0 in the
//! paramagnetic phase, the Bethe inverse covariance is
//! `C⁻¹ = a·I − K1·A` with `a = d/(1 − tanh²K0) − d + 1` and
//! `K1 = tanh K0 / (1 − tanh²K0)`, so its eigenvalues are `η = a − ζ` where
//! ζ follows the (scaled) McKay law. The covariance eigenvalue is γ = 1/η.
//!
//! All spectral integrals are computed in the ζ variable after the
//! substitution `ζ = R sin θ`, `R = 2·K1·√(d−1)`, which removes the
//! inverse-square-root edges of the density.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::asymptotics::paramagnetic_value;
use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature::gauss_legendre;

pub const DEFAULT_ORDER: usize = 2000;
pub const DEFAULT_TOL: f64 = 1e-10;

/// McKay density of ζ for a d-regular graph with edge weight K1.
pub fn mckay_density(zeta: f64, d: usize, k1: f64) -> Result<f64> {
    if d < 3 {
        return Err(Error::Domain(format!("McKay law requires d >= 3, got d = {d}")));
    }
    if !(k1 > 0.0) || !k1.is_finite() {
        return Err(Error::Domain(format!("McKay law requires K1 > 0, got {k1}")));
    }
    let df = d as f64;
    let r2 = 4.0 * k1 * k1 * (df - 1.0);
    let under = r2 - zeta * zeta;
    if under <= 0.0 {
        return Ok(0.0);
    }
    Ok(df * under.sqrt() / (2.0 * PI * (k1 * k1 * df * df - zeta * zeta)))
}

/// Transformed coupling tanh(K0)/(1 − tanh²K0).
pub fn transformed_coupling(k0: f64) -> f64 {
    let t = k0.tanh();
    t / (1.0 - t * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    /// Analytic McKay-law transform.
    Analytic,
    /// Atoms at the eigenvalues of an explicit Bethe inverse covariance.
    /// This is an approximation for loopy graphs.
    Empirical,
}

/// ρ(γ) for the covariance of a paramagnetic Ising model.
///
/// Stores a precomputed discretisation (γ_i, w_i) so that
/// `∫ f(γ) ρ(γ) dγ ≈ Σ w_i f(γ_i)` costs one pass over the nodes.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    pub d: usize,
    pub k0: f64,
    pub k1: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub kind: DensityKind,
    /// η-shift `a` of the Bethe inverse covariance (analytic case).
    shift: f64,
    points: Arc<[(f64, f64)]>,
    coarse: Arc<[(f64, f64)]>,
}

/// A spectral integral together with its error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

fn discretise(d: usize, k1: f64, shift: f64, order: usize) -> Vec<(f64, f64)> {
    let df = d as f64;
    let r = 2.0 * k1 * (df - 1.0).sqrt();
    let rule = gauss_legendre(order);
    let half = 0.5 * PI;
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| {
            let theta = half * x;
            let (s, c) = theta.sin_cos();
            let zeta = r * s;
            // ρ_ζ(ζ) dζ with ζ = R sinθ.
            let jac = df * r * r * c * c / (2.0 * PI * (k1 * k1 * df * df - zeta * zeta));
            let gamma = 1.0 / (shift - zeta);
            (gamma, w * half * jac)
        })
        .collect()
}

impl SpectralDensity {
    /// Analytic density for a d-regular tree-like graph, default quadrature order.
    pub fn build(d: usize, k0: f64) -> Result<Self> {
        Self::build_with_order(d, k0, DEFAULT_ORDER)
    }

    pub fn build_with_order(d: usize, k0: f64, order: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::Domain(format!(
                "the analytic density needs d >= 3 (d = {d} is a degenerate chain)"
            )));
        }
        if !k0.is_finite() {
            return Err(Error::Domain(format!("K0 must be finite, got {k0}")));
        }
        let value = paramagnetic_value(d, k0);
        if value >= 1.0 {
            return Err(Error::NotParamagnetic { d, k0, value });
        }
        if order < 2 {
            return Err(Error::Domain("quadrature order must be at least 2".into()));
        }
        let t = k0.tanh();
        let df = d as f64;
        let shift = df / (1.0 - t * t) - df + 1.0;
        let k1 = transformed_coupling(k0);
        if k1 == 0.0 {
            // Zero coupling: identity covariance, all mass at γ = 1.
            let pts: Arc<[(f64, f64)]> = Arc::from(vec![(1.0, 1.0)]);
            return Ok(Self {
                d,
                k0,
                k1: 0.0,
                eta_min: 1.0,
                eta_max: 1.0,
                gamma_min: 1.0,
                gamma_max: 1.0,
                kind: DensityKind::Analytic,
                shift,
                points: pts.clone(),
                coarse: pts,
            });
        }
        let k1 = k1.abs();
        let r = 2.0 * k1 * (df - 1.0).sqrt();
        let eta_min = shift - r;
        let eta_max = shift + r;
        if eta_min <= 0.0 {
            return Err(Error::Domain(format!(
                "inverse covariance has non-positive eigenvalue edge {eta_min}"
            )));
        }
        let points = discretise(d, k1, shift, order);
        let coarse = discretise(d, k1, shift, (order / 2).max(2) + 1);
        Ok(Self {
            d,
            k0,
            k1,
            eta_min,
            eta_max,
            gamma_min: 1.0 / eta_max,
            gamma_max: 1.0 / eta_min,
            kind: DensityKind::Analytic,
            shift,
            points: points.into(),
            coarse: coarse.into(),
        })
    }

    /// Empirical density from the eigenvalues of the Bethe inverse covariance
    /// `C⁻¹_ii = 1 + Σ_j t_ij²/(1−t_ij²)`, `C⁻¹_ij = −t_ij/(1−t_ij²)`
    /// built on an explicit coupling list.
    pub fn from_couplings(n: usize, edges: &[(usize, usize, f64)], d: usize, k0: f64) -> Result<Self> {
        let hessian = bethe_inverse_covariance(n, edges);
        let etas = linalg::symmetric_eigenvalues(&hessian)?;
        Self::from_inverse_covariance_eigenvalues(&etas, d, k0)
    }

    pub fn from_inverse_covariance_eigenvalues(etas: &[f64], d: usize, k0: f64) -> Result<Self> {
        if etas.is_empty() {
            return Err(Error::Domain("no eigenvalues supplied".into()));
        }
        let eta_min = etas.iter().copied().fold(f64::INFINITY, f64::min);
        let eta_max = etas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if eta_min <= 0.0 {
            return Err(Error::Domain(format!(
                "Bethe inverse covariance is not positive definite (min eigenvalue {eta_min})"
            )));
        }
        let w = 1.0 / etas.len() as f64;
        let pts: Arc<[(f64, f64)]> = etas.iter().map(|e| (1.0 / e, w)).collect::<Vec<_>>().into();
        Ok(Self {
            d,
            k0,
            k1: transformed_coupling(k0),
            eta_min,
            eta_max,
            gamma_min: 1.0 / eta_max,
            gamma_max: 1.0 / eta_min,
            kind: DensityKind::Empirical,
            shift: f64::NAN,
            points: pts.clone(),
            coarse: pts,
        })
    }

    pub fn is_approximation(&self) -> bool {
        self.kind == DensityKind::Empirical
    }

    /// ρ_η(η), zero outside the support. Only defined for the analytic kind.
    pub fn rho_eta(&self, eta: f64) -> f64 {
        match self.kind {
            DensityKind::Analytic if self.k1 > 0.0 => {
                mckay_density(self.shift - eta, self.d, self.k1).unwrap_or(0.0)
            }
            _ => 0.0,
        }
    }

    /// ρ(γ) = ρ_η(1/γ)/γ².
    pub fn rho(&self, gamma: f64) -> f64 {
        if !(gamma > 0.0) {
            return 0.0;
        }
        self.rho_eta(1.0 / gamma) / (gamma * gamma)
    }

    /// Fast path: ∫ f(γ) ρ(γ) dγ on the fine discretisation.
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().map(|&(g, w)| w * f(g)).sum()
    }

    /// ∫ f(γ) ρ(γ) dγ with an error estimate from a half-order rule.
    pub fn spectral_integral<F: FnMut(f64) -> f64>(&self, mut f: F, tol: f64) -> Result<Integral> {
        let fine: f64 = self.points.iter().map(|&(g, w)| w * f(g)).sum();
        let coarse: f64 = self.coarse.iter().map(|&(g, w)| w * f(g)).sum();
        let err = (fine - coarse).abs();
        if !fine.is_finite() || err > tol {
            return Err(Error::Quadrature { estimate: err, tol });
        }
        Ok(Integral {
            value: fine,
            error_estimate: err,
        })
    }

    /// ⟨γ^k⟩.
    pub fn moment(&self, k: i32) -> f64 {
        self.integrate(|g| g.powi(k))
    }

    /// Evenly spaced (γ, ρ(γ)) pairs across the support for plotting.
    pub fn curve(&self, points: usize) -> Vec<(f64, f64)> {
        match self.kind {
            DensityKind::Analytic => {
                let n = points.max(2);
                (0..n)
                    .map(|i| {
                        let g = self.gamma_min + (self.gamma_max - self.gamma_min) * i as f64 / (n - 1) as f64;
                        (g, self.rho(g))
                    })
                    .collect()
            }
            DensityKind::Empirical => histogram(&self.points, self.gamma_min, self.gamma_max, points.max(1)),
        }
    }
}

fn histogram(points: &[(f64, f64)], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64)> {
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut mass = vec![0.0; bins];
    for &(g, w) in points {
        let b = (((g - lo) / width) as usize).min(bins - 1);
        mass[b] += w;
    }
    mass.iter()
        .enumerate()
        .map(|(b, m)| (lo + (b as f64 + 0.5) * width, m / width))
        .collect()
}

/// Bethe-approximation inverse covariance for a zero-field Ising model.
pub fn bethe_inverse_covariance(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut h = DMatrix::<f64>::identity(n, n);
    for &(i, j, coupling) in edges {
        let t = coupling.tanh();
        let denom = 1.0 - t * t;
        h[(i, i)] += t * t / denom;
        h[(j, j)] += t * t / denom;
        h[(i, j)] -= t / denom;
        h[(j, i)] -= t / denom;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mckay_closed_form_at_origin() {
        let v = mckay_density(0.0, 3, 1.0).unwrap();
        assert_abs_diff_eq!(v, 2f64.sqrt() / (3.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.15005, epsilon = 1e-5);
    }

    #[test]
    fn mckay_zero_outside_support() {
        let edge = 2.0 * 2f64.sqrt();
        assert_eq!(mckay_density(edge + 1e-9, 3, 1.0).unwrap(), 0.0);
        assert_eq!(mckay_density(-edge - 1e-9, 3, 1.0).unwrap(), 0.0);
        assert!(mckay_density(edge - 1e-6, 3, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn mckay_rejects_bad_arguments() {
        assert!(mckay_density(0.0, 2, 1.0).is_err());
        assert!(mckay_density(0.0, 3, 0.0).is_err());
        assert!(mckay_density(0.0, 3, -1.0).is_err());
    }

    #[test]
    fn mckay_mass_is_one_by_independent_quadrature() {
        // Oracle: plain composite Gauss–Legendre on many sub-intervals in ζ,
        // with a sqrt-clustering map near each edge (no sinθ substitution).
        for &(d, k1) in &[(3usize, 1.0f64), (4, 0.3), (7, 0.05)] {
            let r = 2.0 * k1 * ((d - 1) as f64).sqrt();
            // ζ = r(1 - 2u²) on u∈[0,1] clusters at +r; split the interval in halves.
            let half = |sign: f64| {
                quadrature::integrate(
                    |u| {
                        let zeta = sign * r * (1.0 - u * u);
                        mckay_density(zeta, d, k1).unwrap() * 2.0 * r * u
                    },
                    0.0,
                    1.0,
                    400,
                )
            };
            let total = half(1.0) + half(-1.0);
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn rr_support_endpoints() {
        let s = SpectralDensity::build(3, 0.4).unwrap();
        // Independent evaluation of the endpoint formulas.
        let t: f64 = 0.4f64.tanh();
        let a = 3.0 / (1.0 - t * t) - 2.0;
        let r = 2.0 * t / (1.0 - t * t) * 2f64.sqrt();
        assert_abs_diff_eq!(s.gamma_min, 1.0 / (a + r), epsilon = 1e-14);
        assert_abs_diff_eq!(s.gamma_max, 1.0 / (a - r), epsilon = 1e-14);
        assert_abs_diff_eq!(s.gamma_min, 0.3620, epsilon = 1e-4);
        assert_abs_diff_eq!(s.gamma_max, 3.9973, epsilon = 1e-3);
        assert_abs_diff_eq!(s.gamma_min, 1.0 / s.eta_max, epsilon = 1e-15);
        assert!(s.gamma_min > 0.0);
    }

    #[test]
    fn normalisation_and_mean() {
        for &(d, k0) in &[(3usize, 0.4f64), (3, 0.1), (4, 0.3), (5, 0.25)] {
            let s = SpectralDensity::build(d, k0).unwrap();
            let mass = s.spectral_integral(|_| 1.0, DEFAULT_TOL).unwrap();
            let mean = s.spectral_integral(|g| g, DEFAULT_TOL).unwrap();
            assert_abs_diff_eq!(mass.value, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(mean.value, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn constant_kernel_with_zero_gamma() {
        let s = SpectralDensity::build(3, 0.4).unwrap();
        let v = s.integrate(|g| 1.0 / (1.0 + 0.0 * g));
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn doubling_order_is_stable() {
        let a = SpectralDensity::build_with_order(3, 0.4, 1000).unwrap();
        let b = SpectralDensity::build_with_order(3, 0.4, 2000).unwrap();
        for kernel in [
            (|g: f64| 1.0 / (1.0 + 0.3 * g)) as fn(f64) -> f64,
            |g| g * g,
            |g| 1.0 / (2.0 + g).powi(2),
        ] {
            assert_abs_diff_eq!(a.integrate(kernel), b.integrate(kernel), epsilon = 1e-8);
        }
    }

    #[test]
    fn density_matches_discretisation() {
        // ∫ρ(γ)dγ by direct γ-quadrature of rho() must agree with the
        // substituted rule.
        let s = SpectralDensity::build(3, 0.4).unwrap();
        let direct = {
            // γ = 1/η, η = a - R(1-2u²)... use η-space with sqrt clustering.
            let a = s.eta_min;
            let b = s.eta_max;
            let mid = 0.5 * (a + b);
            let hw = 0.5 * (b - a);
            let half = |sign: f64| {
                quadrature::integrate(
                    |u| {
                        let eta = mid + sign * hw * (1.0 - u * u);
                        let gamma = 1.0 / eta;
                        s.rho(gamma) * gamma * gamma * 2.0 * hw * u * gamma
                    },
                    0.0,
                    1.0,
                    600,
                )
            };
            half(1.0) + half(-1.0)
        };
        assert_abs_diff_eq!(direct, s.integrate(|g| g), epsilon = 1e-8);
    }

    #[test]
    fn density_nonnegative_and_zero_outside() {
        let s = SpectralDensity::build(3, 0.4).unwrap();
        for i in 0..=1000 {
            let g = 0.1 + 5.0 * i as f64 / 1000.0;
            let r = s.rho(g);
            assert!(r >= 0.0);
            if g < s.gamma_min || g > s.gamma_max {
                assert_eq!(r, 0.0);
            }
        }
    }

    #[test]
    fn weak_coupling_concentrates_at_one() {
        let s = SpectralDensity::build(3, 1e-4).unwrap();
        assert!(s.gamma_min > 0.999 && s.gamma_max < 1.001);
        let zero = SpectralDensity::build(3, 0.0).unwrap();
        assert_eq!(zero.gamma_min, 1.0);
        assert_abs_diff_eq!(zero.integrate(|g| g), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_degenerate_and_ferromagnetic() {
        assert!(SpectralDensity::build(2, 0.4).is_err());
        match SpectralDensity::build(3, 0.9) {
            Err(Error::NotParamagnetic { value, .. }) => assert!(value > 1.0),
            other => panic!("expected paramagnetic violation, got {other:?}"),
        }
    }

    #[test]
    fn empirical_density_of_a_cycle_free_star() {
        // Two spins: Bethe Hessian is exact, C = [[1, t], [t, 1]].
        let k0: f64 = 0.3;
        let s = SpectralDensity::from_couplings(2, &[(0, 1, k0)], 1, k0).unwrap();
        let t = k0.tanh();
        assert_abs_diff_eq!(s.gamma_min, 1.0 - t, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_max, 1.0 + t, epsilon = 1e-12);
        assert_abs_diff_eq!(s.integrate(|g| g), 1.0, epsilon = 1e-12);
        assert!(s.is_approximation());
    }
}
