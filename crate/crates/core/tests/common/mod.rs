//! Oracles shared by the integration suites.
#![allow(dead_code)]

use l1ising::ising::{exact_distribution, state_spins, IsingModel, Provenance, SpinDataset};
use l1ising::loss::Loss;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random sparse model on n spins with couplings drawn from ±[0.1, 0.6].
pub fn random_small_model<R: Rng>(n: usize, rng: &mut R) -> IsingModel {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < 0.45 {
                let k = rng.random_range(0.1..0.6);
                edges.push((i, j, if rng.random::<bool>() { k } else { -k }));
            }
        }
    }
    IsingModel::new(n, edges).unwrap()
}

/// i.i.d. draws from the exact distribution by inverse CDF.
pub fn exact_samples<R: Rng>(model: &IsingModel, m: usize, rng: &mut R) -> SpinDataset {
    let dist = exact_distribution(model).unwrap();
    let mut cdf = Vec::with_capacity(dist.probabilities().len());
    let mut acc = 0.0;
    for p in dist.probabilities() {
        acc += p;
        cdf.push(acc);
    }
    let n = model.n();
    let mut spins = Vec::with_capacity(n * m);
    for _ in 0..m {
        let u: f64 = rng.random::<f64>() * acc;
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        spins.extend(state_spins(n, k));
    }
    SpinDataset::new(n, m, spins, Provenance::default()).unwrap()
}

/// Aligned design x_j^μ = s_center s_j written out densely.
pub fn design(data: &SpinDataset, center: usize) -> DMatrix<f64> {
    let others: Vec<usize> = (0..data.n()).filter(|&j| j != center).collect();
    DMatrix::from_fn(data.m(), others.len(), |mu, k| {
        f64::from(data.get(mu, center) * data.get(mu, others[k]))
    })
}

pub fn loss_value(loss: Loss, y: f64) -> f64 {
    match loss {
        Loss::Quadratic => 0.5 * (1.0 - y) * (1.0 - y),
        Loss::Logistic => (1.0 + (-2.0 * y).exp()).ln(),
    }
}

pub fn objective(loss: Loss, x: &DMatrix<f64>, lambda: f64, j: &DVector<f64>) -> f64 {
    let y = x * j;
    y.iter().map(|&v| loss_value(loss, v)).sum::<f64>() / x.nrows() as f64 + lambda * j.abs().sum()
}

/// Exact ℓ1 minimiser by enumerating every sign pattern σ ∈ {−1, 0, +1}^p.
/// On each pattern the objective is smooth; its stationary point is kept when
/// the signs agree with σ, and the best such point is the global minimiser.
pub fn sign_pattern_oracle(loss: Loss, x: &DMatrix<f64>, lambda: f64) -> (f64, DVector<f64>) {
    let (m, p) = x.shape();
    let mut best = (objective(loss, x, lambda, &DVector::zeros(p)), DVector::zeros(p));
    let patterns = 3usize.pow(p as u32);
    for code in 1..patterns {
        let mut sigma = vec![0.0; p];
        let mut c = code;
        for s in sigma.iter_mut() {
            *s = [0.0, 1.0, -1.0][c % 3];
            c /= 3;
        }
        let support: Vec<usize> = (0..p).filter(|&k| sigma[k] != 0.0).collect();
        let xs = DMatrix::from_fn(m, support.len(), |mu, a| x[(mu, support[a])]);
        let sig = DVector::from_iterator(support.len(), support.iter().map(|&k| sigma[k]));
        let Some(js) = (match loss {
            Loss::Quadratic => {
                let g = xs.transpose() * &xs / m as f64;
                let b = xs.transpose() * DVector::from_element(m, 1.0) / m as f64;
                g.lu().solve(&(b - &sig * lambda))
            }
            Loss::Logistic => newton_restricted(&xs, &sig, lambda),
        }) else {
            continue;
        };
        // a rounding-size entry means the smaller pattern already covers this point
        if js.iter().zip(sig.iter()).any(|(v, s)| v * s <= 1e-9) {
            continue;
        }
        let mut full = DVector::zeros(p);
        for (a, &k) in support.iter().enumerate() {
            full[k] = js[a];
        }
        let obj = objective(loss, x, lambda, &full);
        if obj < best.0 {
            best = (obj, full);
        }
    }
    best
}

/// Damped Newton on (1/M)Σ log(1+e^{−2y}) + λσ·J over the free coordinates.
fn newton_restricted(xs: &DMatrix<f64>, sigma: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let (m, q) = xs.shape();
    let f = |j: &DVector<f64>| -> f64 {
        let y = xs * j;
        y.iter().map(|&v| loss_value(Loss::Logistic, v)).sum::<f64>() / m as f64 + lambda * sigma.dot(j)
    };
    let mut j = DVector::zeros(q);
    for _ in 0..500 {
        let y = xs * &j;
        // d/dy log(1+e^{−2y}) = −2/(1+e^{2y}); second derivative 4e^{2y}/(1+e^{2y})²
        let d1 = y.map(|v| -2.0 / (1.0 + (2.0 * v).exp()));
        let d2 = y.map(|v| {
            let e = (-2.0 * v.abs()).exp();
            4.0 * e / ((1.0 + e) * (1.0 + e))
        });
        let grad = xs.transpose() * &d1 / (2.0 * m as f64) * 2.0 + sigma * lambda;
        if grad.amax() < 1e-13 {
            return Some(j);
        }
        let mut h = DMatrix::zeros(q, q);
        for mu in 0..m {
            let row = xs.row(mu).transpose();
            h += &row * row.transpose() * (d2[mu] / m as f64);
        }
        let step = h.lu().solve(&(-&grad))?;
        let base = f(&j);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        // near the optimum the decrease drops below rounding; pure Newton there
        loop {
            if grad.amax() < 1e-6 {
                j += &step;
                break;
            }
            let cand = &j + &step * t;
            if f(&cand) <= base + 1e-4 * t * slope || t < 1e-12 {
                j = cand;
                break;
            }
            t *= 0.5;
        }
        if j.amax() > 1e3 {
            return None;
        }
    }
    None
}
