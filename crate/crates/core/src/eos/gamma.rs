use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectra::SpectralDensity;

pub const GAMMA_MAX_ITER: usize = 100_000;

/// Spectral integrals at a given Γ, with u = 1/(1 + Γγ):
/// I1 = ⟨u⟩, I2 = ⟨u²⟩, J1 = ⟨γu⟩, J2 = ⟨γu²⟩, W = Var(γu).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralTerms {
    pub i1: f64,
    pub i2: f64,
    pub j1: f64,
    pub j2: f64,
    pub w: f64,
}

impl SpectralTerms {
    pub fn at(density: &SpectralDensity, gamma: f64) -> Self {
        let i1 = density.integrate(|g| 1.0 / (1.0 + gamma * g));
        let i2 = density.integrate(|g| (1.0 + gamma * g).powi(-2));
        let j1 = density.integrate(|g| g / (1.0 + gamma * g));
        let j2 = density.integrate(|g| g * (1.0 + gamma * g).powi(-2));
        let w = density.integrate(|g| (g / (1.0 + gamma * g) - j1).powi(2));
        Self { i1, i2, j1, j2, w }
    }
}

/// Γ solving Γ·∫ρ(γ)/(1+Γγ)dγ = Eη by damped iteration from `start`.
pub fn gamma_fixed_point(e: f64, eta: f64, density: &SpectralDensity, damp: f64) -> Result<f64> {
    gamma_fixed_point_from(e, eta, density, damp, 0.1, 1e-15)
}

pub fn gamma_fixed_point_from(
    e: f64,
    eta: f64,
    density: &SpectralDensity,
    damp: f64,
    start: f64,
    rel_tol: f64,
) -> Result<f64> {
    let target = e * eta;
    if !target.is_finite() || target < 0.0 {
        return Err(Error::Domain(format!("the Gamma equation needs E*eta >= 0, got {target}")));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let ceiling = density.moment(-1);
    if target >= ceiling {
        return Err(Error::Domain(format!(
            "no positive Gamma: E*eta = {target} is not below <1/gamma> = {ceiling}"
        )));
    }
    let mut g = if start.is_finite() && start > 0.0 { start } else { target };
    let mut prev = g;
    for _ in 0..GAMMA_MAX_ITER {
        let i1 = density.integrate(|x| 1.0 / (1.0 + g * x));
        let next = (1.0 - damp) * target / i1 + damp * g;
        prev = g;
        g = next;
        if (g - prev).abs() <= rel_tol * g.abs() {
            return Ok(g);
        }
    }
    Err(Error::GammaOscillation { prev, last: g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_target_series() {
        let rho = SpectralDensity::build(3, 0.4).unwrap();
        for eps in [1e-3, 1e-5, 1e-8] {
            let g = gamma_fixed_point(eps, 1.0, &rho, 0.5).unwrap();
            // Γ = ε(1 + ⟨γ⟩ε + O(ε²)) with ⟨γ⟩ = 1.
            assert!((g / eps - 1.0).abs() < 2.0 * eps, "eps={eps} g={g}");
        }
        assert_eq!(gamma_fixed_point(0.0, 1.0, &rho, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn resubstitution() {
        let rho = SpectralDensity::build(3, 0.4).unwrap();
        let g = gamma_fixed_point(2.0, 0.7, &rho, 0.5).unwrap();
        let i1 = rho.integrate(|x| 1.0 / (1.0 + g * x));
        assert_abs_diff_eq!(g * i1, 1.4, epsilon = 1e-12);
    }

    #[test]
    fn terms_identities() {
        let rho = SpectralDensity::build(3, 0.4).unwrap();
        let g = 0.8;
        let s = SpectralTerms::at(&rho, g);
        assert_abs_diff_eq!(s.i1, 1.0 - g * s.j1, epsilon = 1e-13);
        assert_abs_diff_eq!(s.i2, s.i1 - g * s.j2, epsilon = 1e-13);
        assert_abs_diff_eq!(s.i2 - s.i1 * s.i1, g * g * s.w, epsilon = 1e-13);
    }
}
