//! Fixed-order Gauss rules.
//!
//! Nodes are found by Newton iteration on the three-term recurrences, which is
//! accurate to machine precision for the orders used here (up to a few
//! thousand Legendre nodes, ~100 Hermite nodes). Rules are cached per order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Evaluate P_n(x) and P_n'(x).
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_legendre(n: usize) -> GaussRule {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    if n == 1 {
        return GaussRule {
            nodes: vec![0.0],
            weights: vec![2.0],
        };
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        // Tricomi initial guess, then Newton.
        let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1e-3) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Physicists' Hermite rule: ∫ e^{-x²} f(x) dx ≈ Σ w_i f(x_i).
fn compute_hermite(n: usize) -> GaussRule {
    assert!(n >= 1, "Gauss-Hermite order must be positive");
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Orthonormal recurrence.
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    // Sort ascending for readability of dumps.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    GaussRule {
        nodes: idx.iter().map(|&k| nodes[k]).collect(),
        weights: idx.iter().map(|&k| weights[k]).collect(),
    }
}

type Cache = Mutex<HashMap<usize, Arc<GaussRule>>>;

fn cached(cache: &'static OnceLock<Cache>, n: usize, build: fn(usize) -> GaussRule) -> Arc<GaussRule> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = map.lock().expect("quadrature cache poisoned").get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(build(n));
    map.lock()
        .expect("quadrature cache poisoned")
        .entry(n)
        .or_insert(rule)
        .clone()
}

/// Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(&CACHE, n, compute_legendre)
}

/// Gauss–Hermite rule for the weight e^{-x²}.
pub fn gauss_hermite(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(&CACHE, n, compute_hermite)
}

/// Nodes and weights for expectations over a standard normal variable:
/// E f(z) ≈ Σ w_i f(z_i), with Σ w_i = 1.
pub fn standard_normal_rule(n: usize) -> GaussRule {
    let gh = gauss_hermite(n);
    let scale = PI.sqrt().recip();
    GaussRule {
        nodes: gh.nodes.iter().map(|x| x * std::f64::consts::SQRT_2).collect(),
        weights: gh.weights.iter().map(|w| w * scale).collect(),
    }
}

/// Integrate `f` over [a, b] with an n-point Gauss–Legendre rule.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 20, 61, 2000] {
            let rule = gauss_legendre(n);
            let total: f64 = rule.weights.iter().sum();
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-12);
            // degree 2n-1 is exact
            let deg = (2 * n - 1).min(40);
            let approx: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(deg as i32 - (deg as i32 % 2)))
                .sum();
            let even = deg - deg % 2;
            assert_abs_diff_eq!(approx, 2.0 / (even as f64 + 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn hermite_moments_of_standard_normal() {
        let rule = standard_normal_rule(61);
        let moment = |k: i32| -> f64 {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(z, w)| w * z.powi(k))
                .sum()
        };
        assert_abs_diff_eq!(moment(0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(moment(1), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(moment(2), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(moment(4), 3.0, epsilon = 1e-11);
        assert_abs_diff_eq!(moment(6), 15.0, epsilon = 1e-10);
    }

    #[test]
    fn integrate_sine() {
        let v = integrate(f64::sin, 0.0, PI, 30);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-13);
    }
}
