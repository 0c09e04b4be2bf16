//! Exhaustive enumeration oracle for small models.

use nalgebra::DMatrix;

use super::{IsingModel, SpinDataset};
use crate::error::{Error, Result};

pub const MAX_EXACT_SPINS: usize = 20;

/// Probabilities over all 2^N states; state k has s_i = +1 iff bit i is set.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    n: usize,
    probs: Vec<f64>,
}

pub fn state_index(spins: &[i8]) -> usize {
    spins
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &s)| if s > 0 { acc | 1 << i } else { acc })
}

pub fn state_spins(n: usize, k: usize) -> Vec<i8> {
    (0..n).map(|i| if k >> i & 1 == 1 { 1 } else { -1 }).collect()
}

pub fn exact_distribution(model: &IsingModel) -> Result<ExactDistribution> {
    let n = model.n();
    if n > MAX_EXACT_SPINS {
        return Err(Error::EnumerationTooLarge {
            bits: n,
            limit: MAX_EXACT_SPINS,
        });
    }
    let log_w: Vec<f64> = (0..1usize << n)
        .map(|k| -model.energy(&state_spins(n, k)))
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(ExactDistribution {
        n,
        probs: w.into_iter().map(|x| x / z).collect(),
    })
}

impl ExactDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, spins: &[i8]) -> f64 {
        self.probs[state_index(spins)]
    }

    /// C = E[s sᵀ].
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut c = DMatrix::<f64>::zeros(self.n, self.n);
        for (k, &p) in self.probs.iter().enumerate() {
            let s = state_spins(self.n, k);
            for i in 0..self.n {
                for j in 0..self.n {
                    c[(i, j)] += p * (s[i] * s[j]) as f64;
                }
            }
        }
        c
    }

    /// ½ Σ |p̂(s) − p(s)| against the empirical distribution of a dataset.
    pub fn total_variation(&self, data: &SpinDataset) -> f64 {
        let mut counts = vec![0usize; self.probs.len()];
        for mu in 0..data.m() {
            counts[state_index(data.row(mu))] += 1;
        }
        let m = data.m() as f64;
        0.5 * counts
            .iter()
            .zip(&self.probs)
            .map(|(&c, &p)| (c as f64 / m - p).abs())
            .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_free_spin() {
        let e = exact_distribution(&IsingModel::empty(1)).unwrap();
        assert_eq!(e.probability(&[1]), 0.5);
        assert_eq!(e.probability(&[-1]), 0.5);
    }

    #[test]
    fn two_spin_correlation() {
        let m = IsingModel::new(2, vec![(0, 1, 0.7)]).unwrap();
        let e = exact_distribution(&m).unwrap();
        assert_abs_diff_eq!(e.covariance()[(0, 1)], 0.7f64.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn normalised() {
        let m = IsingModel::new(6, vec![(0, 1, 0.3), (1, 2, -0.8), (2, 5, 1.1), (3, 4, 0.2)]).unwrap();
        let e = exact_distribution(&m).unwrap();
        let s: f64 = e.probabilities().iter().sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
        assert!(exact_distribution(&IsingModel::empty(21)).is_err());
    }
}
