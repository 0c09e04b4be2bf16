//! Scalar helpers shared by the solvers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::quadrature::gauss_legendre;

/// soft(z, τ) = sign(z)·max(|z| − τ, 0).
#[inline]
pub fn soft_threshold(z: f64, tau: f64) -> f64 {
    if z > tau {
        z - tau
    } else if z < -tau {
        z + tau
    } else {
        0.0
    }
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// P(|z| > τ) for a standard normal z, i.e. erfc(τ/√2).
#[inline]
pub fn two_sided_tail(tau: f64) -> f64 {
    erfc(tau * FRAC_1_SQRT_2)
}

/// E[soft(z, τ)²] for z ~ N(0,1):
/// (1 + τ²)·erfc(τ/√2) − 2τ·φ(τ).
///
/// The closed form cancels catastrophically for large τ, so there the
/// integral 2φ(τ)/τ³ ∫₀^∞ v² exp(−v − v²/(2τ²)) dv is used instead.
pub fn soft_threshold_second_moment(tau: f64) -> f64 {
    let tau = tau.abs();
    if tau < 4.0 {
        return (1.0 + tau * tau) * two_sided_tail(tau) - 2.0 * tau * normal_pdf(tau);
    }
    let rule = gauss_legendre(200);
    let upper = 60.0;
    let half = 0.5 * upper;
    let inv2t2 = 0.5 / (tau * tau);
    let integral: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(x, w)| {
            let v = half * (x + 1.0);
            w * v * v * (-v - v * v * inv2t2).exp()
        })
        .sum::<f64>()
        * half;
    2.0 * normal_pdf(tau) / tau.powi(3) * integral
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature;
    use approx::assert_relative_eq;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(1.0, 0.3), 0.7);
        assert_eq!(soft_threshold(-1.0, 0.3), -0.7);
        assert_eq!(soft_threshold(0.2, 0.3), 0.0);
        assert_eq!(soft_threshold(0.3, 0.3), 0.0);
        assert_eq!(soft_threshold(0.5, 0.0), 0.5);
    }

    #[test]
    fn second_moment_against_direct_quadrature() {
        for &tau in &[0.0, 0.5, 1.0, 3.0, 3.99, 4.01, 6.0, 10.0] {
            // 2 ∫_τ^∞ (z−τ)² φ(z) dz with u = z − τ on [0, 40].
            let direct = 2.0
                * quadrature::integrate(|u| u * u * normal_pdf(u + tau), 0.0, 40.0, 800);
            let got = soft_threshold_second_moment(tau);
            assert_relative_eq!(got, direct, max_relative = 1e-9);
        }
        assert_relative_eq!(soft_threshold_second_moment(0.0), 1.0, max_relative = 1e-14);
    }
}
