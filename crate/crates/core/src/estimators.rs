//! ℓ1-regularised neighbourhood regression.
//!
//! Both losses are written in terms of the margin y = s_i·Σ_j J_j s_j, so the
//! design matrix is x_j^μ = s_i^μ s_j^μ ∈ {−1, +1} and every column has unit
//! second moment. The objective is (1/M)Σ_μ ℓ(y^μ) + λ‖J‖₁.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{IsingModel, SpinDataset};
use crate::loss::Loss;
use crate::metrics::SelectionMetrics;
use crate::special::soft_threshold;

pub const DEFAULT_FIT_TOL: f64 = 1e-10;
pub const DEFAULT_FIT_MAX_ITER: usize = 100_000;
pub const DEFAULT_MAGNITUDE_GUARD: f64 = 30.0;

const INNER_MAX_SWEEPS: usize = 1000;
const ARMIJO: f64 = 1e-4;
const NEGLIGIBLE_DECREASE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogrMethod {
    /// Proximal Newton steps, each solved by coordinate descent.
    #[default]
    ProximalNewton,
    /// Proximal gradient with backtracking on the Lipschitz estimate.
    ProximalGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Target for the KKT residual.
    pub tol: f64,
    pub max_iter: usize,
    pub magnitude_guard: f64,
    pub logr_method: LogrMethod,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_FIT_TOL,
            max_iter: DEFAULT_FIT_MAX_ITER,
            magnitude_guard: DEFAULT_MAGNITUDE_GUARD,
            logr_method: LogrMethod::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodEstimate {
    pub center: usize,
    pub loss: Loss,
    pub lambda: f64,
    /// Ĵ for the other N − 1 spins in increasing index order, center skipped.
    pub coeffs: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl NeighborhoodEstimate {
    /// Spin index of coefficient k.
    pub fn variable(&self, k: usize) -> usize {
        if k < self.center {
            k
        } else {
            k + 1
        }
    }

    /// Ĵ_{center, j}; zero for j = center.
    pub fn coupling_to(&self, j: usize) -> f64 {
        match j.cmp(&self.center) {
            std::cmp::Ordering::Less => self.coeffs[j],
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => self.coeffs[j - 1],
        }
    }
}

/// Column-major aligned design for one center.
struct Design {
    m: usize,
    p: usize,
    cols: Vec<f64>,
}

impl Design {
    fn new(data: &SpinDataset, center: usize) -> Result<Self> {
        let n = data.n();
        if center >= n {
            return Err(Error::Domain(format!("center {center} out of range for N = {n}")));
        }
        if n < 2 {
            return Err(Error::Domain("need at least two spins".into()));
        }
        let m = data.m();
        let p = n - 1;
        let mut cols = vec![0.0; m * p];
        for mu in 0..m {
            let row = data.row(mu);
            let s0 = row[center];
            let mut k = 0;
            for (j, &s) in row.iter().enumerate() {
                if j != center {
                    cols[k * m + mu] = f64::from(s0 * s);
                    k += 1;
                }
            }
        }
        Ok(Self { m, p, cols })
    }

    #[inline]
    fn col(&self, k: usize) -> &[f64] {
        &self.cols[k * self.m..(k + 1) * self.m]
    }

    fn margins(&self, j: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for (k, &v) in j.iter().enumerate() {
            if v != 0.0 {
                axpy(v, self.col(k), &mut y);
            }
        }
        y
    }

    fn mean_dot(&self, k: usize, v: &[f64]) -> f64 {
        self.col(k).iter().zip(v).map(|(x, r)| x * r).sum::<f64>() / self.m as f64
    }

    fn gradient(&self, loss: Loss, y: &[f64]) -> Vec<f64> {
        let dl: Vec<f64> = y.iter().map(|&v| loss.derivative(v)).collect();
        (0..self.p).map(|k| self.mean_dot(k, &dl)).collect()
    }

    fn smooth(&self, loss: Loss, y: &[f64]) -> f64 {
        y.iter().map(|&v| loss.value(v)).sum::<f64>() / self.m as f64
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn l1(j: &[f64]) -> f64 {
    j.iter().map(|v| v.abs()).sum()
}

/// Largest violation of 0 ∈ ∇f + λ∂‖J‖₁.
pub fn kkt_violation(grad: &[f64], j: &[f64], lambda: f64) -> f64 {
    grad.iter()
        .zip(j)
        .map(|(&g, &v)| {
            if v != 0.0 {
                (g + lambda * v.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// (1/M)Σ ℓ(y^μ) + λ‖J‖₁ for coefficients over the non-center spins.
pub fn objective(loss: Loss, data: &SpinDataset, center: usize, lambda: f64, coeffs: &[f64]) -> Result<f64> {
    let design = Design::new(data, center)?;
    if coeffs.len() != design.p {
        return Err(Error::Domain(format!(
            "expected {} coefficients, got {}",
            design.p,
            coeffs.len()
        )));
    }
    Ok(design.smooth(loss, &design.margins(coeffs)) + lambda * l1(coeffs))
}

fn finish(
    loss: Loss,
    design: &Design,
    center: usize,
    lambda: f64,
    j: Vec<f64>,
    iterations: usize,
    opts: &FitOptions,
) -> NeighborhoodEstimate {
    let mut j = j;
    let mut y = design.margins(&j);
    let mut grad = design.gradient(loss, &y);
    // Coordinates whose optimum is zero with a gradient on the ±λ boundary are
    // approached only sublinearly. Drop rounding-size survivors when the zero
    // still satisfies the optimality conditions.
    for k in 0..j.len() {
        if j[k] == 0.0 || j[k].abs() > opts.tol {
            continue;
        }
        let mut trial = j.clone();
        trial[k] = 0.0;
        let ty = design.margins(&trial);
        let tg = design.gradient(loss, &ty);
        if kkt_violation(&tg, &trial, lambda) <= opts.tol.max(kkt_violation(&grad, &j, lambda)) {
            (j, y, grad) = (trial, ty, tg);
        }
    }
    let mut warnings = Vec::new();
    let biggest = j.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if biggest > opts.magnitude_guard {
        warnings.push(format!(
            "largest coefficient {biggest:.3} exceeds {}: data may be nearly separable",
            opts.magnitude_guard
        ));
    }
    NeighborhoodEstimate {
        center,
        loss,
        lambda,
        objective: design.smooth(loss, &y) + lambda * l1(&j),
        kkt_residual: kkt_violation(&grad, &j, lambda),
        coeffs: j,
        iterations,
        warnings,
    }
}

pub fn linr_fit(data: &SpinDataset, center: usize, lambda: f64) -> Result<NeighborhoodEstimate> {
    linr_fit_with(data, center, lambda, &FitOptions::default())
}

/// Cyclic coordinate descent with residual updates. Columns have unit second
/// moment, so each coordinate update is an exact soft-threshold.
pub fn linr_fit_with(data: &SpinDataset, center: usize, lambda: f64, opts: &FitOptions) -> Result<NeighborhoodEstimate> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    let design = Design::new(data, center)?;
    let p = design.p;
    let mut j = vec![0.0; p];
    // r = 1 − y
    let mut r = vec![1.0; design.m];
    let mut sweeps = 0;
    let mut kkt = f64::INFINITY;

    let update = |k: usize, j: &mut [f64], r: &mut [f64], design: &Design| -> f64 {
        let old = j[k];
        let new = soft_threshold(old + design.mean_dot(k, r), lambda);
        if new != old {
            axpy(old - new, design.col(k), r);
            j[k] = new;
        }
        (new - old).abs()
    };

    while sweeps < opts.max_iter {
        for k in 0..p {
            update(k, &mut j, &mut r, &design);
        }
        sweeps += 1;
        // Polish the active set before the next full pass.
        let active: Vec<usize> = (0..p).filter(|&k| j[k] != 0.0).collect();
        for _ in 0..INNER_MAX_SWEEPS {
            if sweeps >= opts.max_iter {
                break;
            }
            let mut change: f64 = 0.0;
            for &k in &active {
                change = change.max(update(k, &mut j, &mut r, &design));
            }
            sweeps += 1;
            if change <= 0.1 * opts.tol {
                break;
            }
        }
        // Fresh residuals so rounding drift cannot hide a KKT violation.
        let y = design.margins(&j);
        for (ri, yi) in r.iter_mut().zip(&y) {
            *ri = 1.0 - yi;
        }
        kkt = kkt_violation(&design.gradient(Loss::Quadratic, &y), &j, lambda);
        if kkt <= opts.tol {
            return Ok(finish(Loss::Quadratic, &design, center, lambda, j, sweeps, opts));
        }
    }
    Err(Error::IterationCap {
        iterations: sweeps,
        kkt,
    })
}

pub fn logr_fit(data: &SpinDataset, center: usize, lambda: f64) -> Result<NeighborhoodEstimate> {
    logr_fit_with(data, center, lambda, &FitOptions::default())
}

pub fn logr_fit_with(data: &SpinDataset, center: usize, lambda: f64, opts: &FitOptions) -> Result<NeighborhoodEstimate> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "logistic fit needs lambda > 0 (unregularised fits diverge on separable data), got {lambda}"
        )));
    }
    let design = Design::new(data, center)?;
    match opts.logr_method {
        LogrMethod::ProximalNewton => logr_newton(&design, center, lambda, opts),
        LogrMethod::ProximalGradient => logr_gradient(&design, center, lambda, opts),
    }
}

pub fn fit(loss: Loss, data: &SpinDataset, center: usize, lambda: f64, opts: &FitOptions) -> Result<NeighborhoodEstimate> {
    match loss {
        Loss::Quadratic => linr_fit_with(data, center, lambda, opts),
        Loss::Logistic => logr_fit_with(data, center, lambda, opts),
    }
}

fn logr_newton(design: &Design, center: usize, lambda: f64, opts: &FitOptions) -> Result<NeighborhoodEstimate> {
    let loss = Loss::Logistic;
    let (m, p) = (design.m, design.p);
    let mut j = vec![0.0; p];
    let mut y = vec![0.0; m];
    let mut f = design.smooth(loss, &y);
    let mut kkt = f64::INFINITY;
    let mut u = vec![0.0; p];
    let mut v = vec![0.0; m];

    for step in 0..opts.max_iter {
        let grad = design.gradient(loss, &y);
        kkt = kkt_violation(&grad, &j, lambda);
        if kkt <= opts.tol {
            return Ok(finish(loss, design, center, lambda, j, step, opts));
        }
        let w: Vec<f64> = y.iter().map(|&t| loss.second_derivative(t)).collect();
        // x² = 1, so every diagonal entry of the Hessian is the mean weight.
        let a = (w.iter().sum::<f64>() / m as f64).max(1e-12);

        // Coordinate descent on g·δ + ½δᵀHδ + λ‖J + δ‖₁, with v = Xδ.
        u.copy_from_slice(&j);
        v.iter_mut().for_each(|t| *t = 0.0);
        let coord = |k: usize, u: &mut [f64], v: &mut [f64]| -> f64 {
            let col = design.col(k);
            let hv = col.iter().zip(v.iter()).zip(&w).map(|((x, vi), wi)| x * vi * wi).sum::<f64>() / m as f64;
            let old = u[k];
            let new = soft_threshold(old - (grad[k] + hv) / a, lambda / a);
            if new != old {
                axpy(new - old, col, v);
                u[k] = new;
            }
            (new - old).abs()
        };
        let inner_tol = 1e-6 * kkt.min(1.0);
        for _ in 0..INNER_MAX_SWEEPS {
            let mut change: f64 = 0.0;
            for k in 0..p {
                change = change.max(coord(k, &mut u, &mut v));
            }
            if change <= inner_tol {
                break;
            }
            let active: Vec<usize> = (0..p).filter(|&k| u[k] != 0.0).collect();
            for _ in 0..INNER_MAX_SWEEPS {
                let mut c: f64 = 0.0;
                for &k in &active {
                    c = c.max(coord(k, &mut u, &mut v));
                }
                if c <= inner_tol {
                    break;
                }
            }
        }

        let base = f + lambda * l1(&j);
        let decrease: f64 = grad.iter().zip(u.iter().zip(&j)).map(|(g, (un, jo))| g * (un - jo)).sum::<f64>()
            + lambda * (l1(&u) - l1(&j));
        if decrease >= 0.0 || -decrease <= NEGLIGIBLE_DECREASE * (1.0 + base.abs()) {
            if u == j {
                return Err(Error::IterationCap { iterations: step, kkt });
            }
            // Step below the objective's rounding noise: take it whole.
            j.copy_from_slice(&u);
            y = design.margins(&j);
            f = design.smooth(loss, &y);
            continue;
        }
        let mut t = 1.0;
        let mut trial_y = vec![0.0; m];
        let mut accepted = false;
        for _ in 0..60 {
            for ((ty, yi), vi) in trial_y.iter_mut().zip(&y).zip(&v) {
                *ty = yi + t * vi;
            }
            let trial_j: Vec<f64> = if t == 1.0 {
                u.clone()
            } else {
                j.iter().zip(&u).map(|(jo, un)| jo + t * (un - jo)).collect()
            };
            let ft = design.smooth(loss, &trial_y);
            if ft + lambda * l1(&trial_j) <= base + ARMIJO * t * decrease {
                j = trial_j;
                y = design.margins(&j);
                f = design.smooth(loss, &y);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::IterationCap { iterations: step, kkt });
        }
    }
    Err(Error::IterationCap {
        iterations: opts.max_iter,
        kkt,
    })
}

fn logr_gradient(design: &Design, center: usize, lambda: f64, opts: &FitOptions) -> Result<NeighborhoodEstimate> {
    let loss = Loss::Logistic;
    let p = design.p;
    let mut j = vec![0.0; p];
    let mut y = design.margins(&j);
    let mut f = design.smooth(loss, &y);
    let mut lip = 1.0;
    let mut kkt = f64::INFINITY;
    for step in 0..opts.max_iter {
        let grad = design.gradient(loss, &y);
        kkt = kkt_violation(&grad, &j, lambda);
        if kkt <= opts.tol {
            return Ok(finish(loss, design, center, lambda, j, step, opts));
        }
        lip *= 0.9;
        loop {
            let next: Vec<f64> = j.iter().zip(&grad).map(|(v, g)| soft_threshold(v - g / lip, lambda / lip)).collect();
            let ny = design.margins(&next);
            let nf = design.smooth(loss, &ny);
            let diff: Vec<f64> = next.iter().zip(&j).map(|(a, b)| a - b).collect();
            let model = f
                + diff.iter().zip(&grad).map(|(d, g)| d * g).sum::<f64>()
                + 0.5 * lip * diff.iter().map(|d| d * d).sum::<f64>();
            if nf <= model + 1e-15 * (1.0 + f.abs()) || lip > 1e12 {
                j = next;
                y = ny;
                f = nf;
                break;
            }
            lip *= 2.0;
        }
    }
    Err(Error::IterationCap {
        iterations: opts.max_iter,
        kkt,
    })
}

/// Spin indices with exactly nonzero coefficients.
pub fn extract_neighborhood(est: &NeighborhoodEstimate) -> Vec<usize> {
    (0..est.coeffs.len())
        .filter(|&k| est.coeffs[k] != 0.0)
        .map(|k| est.variable(k))
        .collect()
}

/// Set comparison against the true neighbours of `center`, and RSS over all
/// N − 1 coordinates.
pub fn score(est: &NeighborhoodEstimate, truth: &IsingModel, center: usize) -> Result<SelectionMetrics> {
    let n = truth.n();
    if center >= n {
        return Err(Error::Domain(format!("center {center} out of range for N = {n}")));
    }
    if est.center != center || est.coeffs.len() + 1 != n {
        return Err(Error::Domain(format!(
            "estimate for center {} with {} coefficients does not match center {center} of an N = {n} model",
            est.center,
            est.coeffs.len()
        )));
    }
    let mut truth_row = vec![0.0; n];
    for &(j, k) in truth.neighbors(center) {
        truth_row[j] = k;
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut rss = 0.0;
    for (k, &c) in est.coeffs.iter().enumerate() {
        let t = truth_row[est.variable(k)];
        match (c != 0.0, t != 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
        rss += (c - t) * (c - t);
    }
    let n_inactive = n - 1 - truth.degree(center);
    Ok(SelectionMetrics::from_counts(tp, fp, fn_, rss, n_inactive))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{gen_rr_graph, metropolis_sample, Provenance, SignMode};
    use crate::rng::rng_from_seed;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    fn random_data(n: usize, m: usize, seed: u64) -> SpinDataset {
        let mut rng = rng_from_seed(seed);
        let spins = (0..n * m).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        SpinDataset::new(n, m, spins, Provenance::default()).unwrap()
    }

    fn ising_data(n: usize, m: usize, seed: u64) -> (IsingModel, SpinDataset) {
        let mut rng = rng_from_seed(seed);
        let model = gen_rr_graph(n, 3, 0.4, SignMode::RandomSign, 1000, &mut rng).unwrap();
        let data = metropolis_sample(&model, m, 200, 5, &mut rng).unwrap();
        (model, data)
    }

    #[test]
    fn large_lambda_gives_zero() {
        let data = random_data(8, 30, 1);
        let design = Design::new(&data, 2).unwrap();
        let lmax = (0..design.p)
            .map(|k| design.col(k).iter().sum::<f64>().abs() / 30.0)
            .fold(0.0, f64::max);
        let est = linr_fit(&data, 2, lmax).unwrap();
        assert!(est.coeffs.iter().all(|&c| c == 0.0));
        let est = logr_fit(&data, 2, lmax).unwrap();
        assert!(est.coeffs.iter().all(|&c| c == 0.0));
        let est = logr_fit(&data, 2, 1e6).unwrap();
        assert!(extract_neighborhood(&est).is_empty());
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let data = random_data(6, 40, 2);
        let center = 0;
        let design = Design::new(&data, center).unwrap();
        let x = DMatrix::from_fn(40, 5, |mu, k| design.col(k)[mu]);
        let ones = DVector::from_element(40, 1.0);
        let ols = (x.transpose() * &x).lu().solve(&(x.transpose() * ones)).unwrap();
        let est = linr_fit(&data, center, 0.0).unwrap();
        assert!(est.kkt_residual <= 1e-8);
        for k in 0..5 {
            assert!((est.coeffs[k] - ols[k]).abs() < 1e-8, "{k}: {} vs {}", est.coeffs[k], ols[k]);
        }
    }

    #[test]
    fn logr_rejects_nonpositive_lambda() {
        let data = random_data(4, 10, 3);
        assert!(matches!(logr_fit(&data, 0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(linr_fit(&data, 0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(linr_fit(&data, 4, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn logr_beats_linr_point_under_logistic_loss() {
        let (_, data) = ising_data(20, 200, 4);
        for center in [0, 7] {
            let lin = linr_fit(&data, center, 0.1).unwrap();
            let log = logr_fit(&data, center, 0.1).unwrap();
            let at_lin = objective(Loss::Logistic, &data, center, 0.1, &lin.coeffs).unwrap();
            assert!(log.objective <= at_lin + 1e-12);
            assert!(log.kkt_residual <= 1e-8);
        }
    }

    #[test]
    fn newton_and_gradient_agree() {
        let (_, data) = ising_data(12, 80, 5);
        let pg = FitOptions {
            logr_method: LogrMethod::ProximalGradient,
            ..FitOptions::default()
        };
        let a = logr_fit(&data, 3, 0.05).unwrap();
        let b = logr_fit_with(&data, 3, 0.05, &pg).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-10);
        assert_eq!(extract_neighborhood(&a), extract_neighborhood(&b));
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).abs() < 1e-7);
        }
    }

    #[test]
    fn final_objective_beats_random_points() {
        let (_, data) = ising_data(10, 60, 6);
        let mut rng = rng_from_seed(60);
        for loss in [Loss::Quadratic, Loss::Logistic] {
            let est = fit(loss, &data, 1, 0.05, &FitOptions::default()).unwrap();
            for _ in 0..100 {
                let pt: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert!(est.objective <= objective(loss, &data, 1, 0.05, &pt).unwrap());
            }
        }
    }

    #[test]
    fn column_flip_negates_linr_coefficient_exactly() {
        let (_, data) = ising_data(16, 150, 7);
        let est = linr_fit(&data, 0, 0.05).unwrap();
        let mut flipped = data.clone();
        flipped.flip_column(5);
        let est2 = linr_fit(&flipped, 0, 0.05).unwrap();
        for k in 0..15 {
            if k == 4 {
                assert_eq!(est2.coeffs[k], -est.coeffs[k]);
            } else {
                assert_eq!(est2.coeffs[k], est.coeffs[k]);
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let (_, data) = ising_data(12, 120, 8);
        let perm: Vec<usize> = vec![3, 0, 11, 5, 1, 9, 2, 10, 4, 6, 8, 7];
        let permuted = data.permute_columns(&perm).unwrap();
        // new column c holds old spin perm[c]; old center 0 now sits at 1
        for loss in [Loss::Quadratic, Loss::Logistic] {
            let a = fit(loss, &data, 0, 0.05, &FitOptions::default()).unwrap();
            let b = fit(loss, &permuted, 1, 0.05, &FitOptions::default()).unwrap();
            for (c, &old) in perm.iter().enumerate() {
                if c != 1 {
                    assert!((b.coupling_to(c) - a.coupling_to(old)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn scoring() {
        let mut rng = rng_from_seed(9);
        let model = gen_rr_graph(10, 3, 0.4, SignMode::RandomSign, 1000, &mut rng).unwrap();
        let center = 2;
        let mut est = NeighborhoodEstimate {
            center,
            loss: Loss::Quadratic,
            lambda: 0.3,
            coeffs: vec![0.0; 9],
            objective: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
            warnings: vec![],
        };
        let empty = score(&est, &model, center).unwrap();
        assert_eq!(empty.recall, 0.0);
        assert_eq!(empty.fn_, 3.0);
        assert!(empty.precision.is_none());

        let jbar = 0.06204;
        for &(j, k) in model.neighbors(center) {
            let idx = if j < center { j } else { j - 1 };
            est.coeffs[idx] = jbar * k.signum();
        }
        let s = score(&est, &model, center).unwrap();
        assert_eq!(s.precision, Some(1.0));
        assert_eq!(s.recall, 1.0);
        assert!((s.rss - 3.0 * (jbar - 0.4f64).powi(2)).abs() < 1e-14);
        let set = extract_neighborhood(&est);
        let mut truth: Vec<usize> = model.neighbors(center).iter().map(|&(j, _)| j).collect();
        truth.sort_unstable();
        assert_eq!(set, truth);
        assert!(score(&est, &model, 3).is_err());
    }

    #[test]
    fn estimate_round_trips_through_json() {
        let data = random_data(5, 20, 10);
        let est = linr_fit(&data, 1, 0.1).unwrap();
        let text = serde_json::to_string(&est).unwrap();
        let back: NeighborhoodEstimate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, est);
    }
}
