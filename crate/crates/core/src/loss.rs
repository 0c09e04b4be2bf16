//! Losses of the neighborhood M-estimators, written as functions of the
//! margin y = s_i·h.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// ℓ(y) = (y − 1)²/2, the LASSO neighborhood regression.
    #[serde(alias = "linr")]
    Quadratic,
    /// ℓ(y) = log(1 + e^{−2y}), the logistic neighborhood regression.
    #[serde(alias = "logr")]
    Logistic,
}

impl Loss {
    pub fn short_name(self) -> &'static str {
        match self {
            Loss::Quadratic => "linr",
            Loss::Logistic => "logr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linr" | "quadratic" => Ok(Loss::Quadratic),
            "logr" | "logistic" => Ok(Loss::Logistic),
            other => Err(Error::Config(format!("unknown loss '{other}' (expected linr or logr)"))),
        }
    }

    #[inline]
    pub fn value(self, y: f64) -> f64 {
        match self {
            Loss::Quadratic => 0.5 * (y - 1.0) * (y - 1.0),
            // log(1 + e^{-2y}) without overflow
            Loss::Logistic => {
                let t = -2.0 * y;
                if t > 0.0 {
                    t + (-t).exp().ln_1p()
                } else {
                    t.exp().ln_1p()
                }
            }
        }
    }

    #[inline]
    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Loss::Quadratic => y - 1.0,
            Loss::Logistic => y.tanh() - 1.0,
        }
    }

    #[inline]
    pub fn second_derivative(self, y: f64) -> f64 {
        match self {
            Loss::Quadratic => 1.0,
            Loss::Logistic => {
                let t = y.tanh();
                1.0 - t * t
            }
        }
    }

    /// ŷ = argmin_y (y − a)²/(2χ) + ℓ(y), i.e. the proximal map of χℓ at a.
    ///
    /// For the logistic loss the stationarity condition
    /// (ŷ − a)/χ = 1 − tanh ŷ is solved by Newton's method safeguarded with
    /// the bracket ŷ ∈ [a, a + 2χ].
    pub fn prox(self, a: f64, chi: f64) -> Option<f64> {
        if chi <= 0.0 {
            return Some(a);
        }
        match self {
            Loss::Quadratic => Some((a + chi) / (1.0 + chi)),
            Loss::Logistic => logistic_prox(a, chi, a),
        }
    }

    /// Same as [`Loss::prox`] with a warm start.
    pub fn prox_from(self, a: f64, chi: f64, start: f64) -> Option<f64> {
        match self {
            Loss::Logistic if chi > 0.0 => logistic_prox(a, chi, start),
            _ => self.prox(a, chi),
        }
    }

    /// Moreau envelope min_y (y − a)²/(2χ) + ℓ(y), given its minimiser.
    #[inline]
    pub fn envelope(self, a: f64, chi: f64, yhat: f64) -> f64 {
        if chi <= 0.0 {
            return self.value(a);
        }
        (yhat - a) * (yhat - a) / (2.0 * chi) + self.value(yhat)
    }
}

const PROX_TOL: f64 = 1e-12;

fn logistic_prox(a: f64, chi: f64, start: f64) -> Option<f64> {
    let phi = |y: f64| y - a - chi * (1.0 - y.tanh());
    let mut lo = a;
    let mut hi = a + 2.0 * chi;
    let mut y = start.clamp(lo, hi);
    for _ in 0..200 {
        let t = y.tanh();
        let f = y - a - chi * (1.0 - t);
        if f == 0.0 {
            return Some(y);
        }
        if f > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let df = 1.0 + chi * (1.0 - t * t);
        let mut next = y - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= PROX_TOL * (1.0 + y.abs()) {
            return Some(next);
        }
        y = next;
        if hi - lo <= PROX_TOL * (1.0 + y.abs()) {
            return Some(0.5 * (lo + hi));
        }
    }
    let y = 0.5 * (lo + hi);
    (phi(y).abs() <= 1e-9).then_some(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn derivatives_match_finite_differences() {
        for loss in [Loss::Quadratic, Loss::Logistic] {
            for &y in &[-3.0, -0.7, 0.0, 0.4, 2.5, 30.0] {
                let h = 1e-6;
                let d1 = (loss.value(y + h) - loss.value(y - h)) / (2.0 * h);
                let d2 = (loss.derivative(y + h) - loss.derivative(y - h)) / (2.0 * h);
                assert_abs_diff_eq!(d1, loss.derivative(y), epsilon = 1e-7);
                assert_abs_diff_eq!(d2, loss.second_derivative(y), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn logistic_value_is_stable() {
        assert_abs_diff_eq!(Loss::Logistic.value(0.0), 2f64.ln(), epsilon = 1e-15);
        assert!(Loss::Logistic.value(-400.0).is_finite());
        assert_abs_diff_eq!(Loss::Logistic.value(-400.0), 800.0, epsilon = 1e-9);
        assert!(Loss::Logistic.value(400.0) >= 0.0);
    }

    #[test]
    fn prox_satisfies_stationarity() {
        for &a in &[-5.0, -1.0, 0.0, 0.3, 4.0] {
            for &chi in &[1e-6, 0.1, 1.0, 10.0] {
                let y = Loss::Logistic.prox(a, chi).unwrap();
                assert!((y - a - chi * (1.0 - y.tanh())).abs() <= 1e-10 * (1.0 + y.abs()));
                let yq = Loss::Quadratic.prox(a, chi).unwrap();
                assert!((yq - a - chi * (1.0 - yq)).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn prox_at_zero_chi_is_identity() {
        assert_eq!(Loss::Logistic.prox(0.37, 0.0), Some(0.37));
        assert_eq!(Loss::Quadratic.prox(0.37, 0.0), Some(0.37));
    }
}
