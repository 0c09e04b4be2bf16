//! Exact marginal of a spin and its d neighbours on a tree-like graph:
//! P(s0, s_Ψ) ∝ exp(K0·s0·Σ_j s_j).

use rand::Rng;

use crate::error::{Error, Result};

pub const MAX_NEIGHBORHOOD_DEGREE: usize = 20;

/// State k encodes s0 in bit 0 and s_j in bit j (set bit = +1).
#[derive(Debug, Clone)]
pub struct NeighborhoodTable {
    d: usize,
    k0: f64,
    probs: Vec<f64>,
    /// Cumulative distribution under |K0|; sampling flips s_Ψ when K0 < 0,
    /// which keeps draws for ±K0 exact gauge images of each other.
    cdf: Vec<f64>,
}

#[inline]
fn spin(state: usize, bit: usize) -> i8 {
    if state >> bit & 1 == 1 {
        1
    } else {
        -1
    }
}

fn weights(d: usize, k0: f64) -> Vec<f64> {
    let n_states = 1usize << (d + 1);
    let raw: Vec<f64> = (0..n_states)
        .map(|k| {
            let s0 = spin(k, 0) as f64;
            let sum: i32 = (1..=d).map(|j| spin(k, j) as i32).sum();
            // shift by the maximum exponent for stability
            (k0 * s0 * sum as f64 - k0.abs() * d as f64).exp()
        })
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

impl NeighborhoodTable {
    pub fn new(d: usize, k0: f64) -> Result<Self> {
        if d > MAX_NEIGHBORHOOD_DEGREE {
            return Err(Error::EnumerationTooLarge {
                bits: d + 1,
                limit: MAX_NEIGHBORHOOD_DEGREE + 1,
            });
        }
        if !k0.is_finite() {
            return Err(Error::Domain(format!("K0 must be finite, got {k0}")));
        }
        let probs = weights(d, k0);
        let sampling = if k0 < 0.0 { weights(d, -k0) } else { probs.clone() };
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = sampling
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().expect("at least two states") = 1.0;
        Ok(Self { d, k0, probs, cdf })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn probability(&self, state: usize) -> f64 {
        self.probs[state]
    }

    /// (s0, s_1..s_d) for a state index.
    pub fn spins(&self, state: usize) -> (i8, Vec<i8>) {
        (spin(state, 0), (1..=self.d).map(|j| spin(state, j)).collect())
    }

    /// Σ_states P(s0, s_Ψ)·f(s0, s_Ψ).
    pub fn expectation<F: FnMut(i8, &[i8]) -> f64>(&self, mut f: F) -> f64 {
        let mut buf = vec![0i8; self.d];
        let mut total = 0.0;
        for (k, &p) in self.probs.iter().enumerate() {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = spin(k, j + 1);
            }
            total += p * f(spin(k, 0), &buf);
        }
        total
    }

    /// Distribution of m = s0·Σ_j s_j as (m, P(m)) pairs, m ascending.
    pub fn aligned_distribution(&self) -> Vec<(f64, f64)> {
        let d = self.d as i32;
        let mut mass = vec![0.0; self.d + 1];
        for (k, &p) in self.probs.iter().enumerate() {
            let s0 = spin(k, 0) as i32;
            let sum: i32 = (1..=self.d).map(|j| spin(k, j) as i32).sum();
            mass[((s0 * sum + d) / 2) as usize] += p;
        }
        mass.into_iter()
            .enumerate()
            .map(|(i, p)| ((2 * i as i32 - d) as f64, p))
            .collect()
    }

    /// One draw by inverse CDF, returned as (s0, s_Ψ) written into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [i8]) -> i8 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let flip = if self.k0 < 0.0 { -1 } else { 1 };
        for (j, o) in out.iter_mut().enumerate() {
            *o = spin(k, j + 1) * flip;
        }
        spin(k, 0)
    }
}

/// Σ over the 2^(d+1) neighbourhood states of f weighted by the exact marginal.
pub fn neighborhood_expectation<F: FnMut(i8, &[i8]) -> f64>(d: usize, k0: f64, f: F) -> Result<f64> {
    Ok(NeighborhoodTable::new(d, k0)?.expectation(f))
}

/// M i.i.d. draws from the (d+1)-spin marginal.
#[derive(Debug, Clone)]
pub struct NeighborhoodSamples {
    pub d: usize,
    pub s0: Vec<i8>,
    /// Row-major M×d.
    pub neighbors: Vec<i8>,
}

impl NeighborhoodSamples {
    pub fn len(&self) -> usize {
        self.s0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s0.is_empty()
    }

    pub fn row(&self, mu: usize) -> &[i8] {
        &self.neighbors[mu * self.d..(mu + 1) * self.d]
    }
}

pub fn neighborhood_sampler<R: Rng + ?Sized>(d: usize, k0: f64, m: usize, rng: &mut R) -> Result<NeighborhoodSamples> {
    let table = NeighborhoodTable::new(d, k0)?;
    Ok(table.sample(m, rng))
}

impl NeighborhoodTable {
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> NeighborhoodSamples {
        let mut s0 = Vec::with_capacity(m);
        let mut neighbors = vec![0i8; m * self.d];
        for mu in 0..m {
            let row = &mut neighbors[mu * self.d..(mu + 1) * self.d];
            s0.push(self.sample_into(rng, row));
        }
        NeighborhoodSamples {
            d: self.d,
            s0,
            neighbors,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn enumeration_examples() {
        let t = 0.4f64.tanh();
        let one = neighborhood_expectation(3, 0.4, |_, _| 1.0).unwrap();
        assert_abs_diff_eq!(one, 1.0, epsilon = 1e-15);
        let c0k = neighborhood_expectation(3, 0.4, |s0, s| (s0 * s[1]) as f64).unwrap();
        assert_abs_diff_eq!(c0k, t, epsilon = 1e-14);
        assert_abs_diff_eq!(c0k, 0.379949, epsilon = 1e-6);
        let ckj = neighborhood_expectation(3, 0.4, |_, s| (s[0] * s[2]) as f64).unwrap();
        assert_abs_diff_eq!(ckj, t * t, epsilon = 1e-14);
    }

    #[test]
    fn too_large() {
        assert!(matches!(
            NeighborhoodTable::new(21, 0.1),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn aligned_distribution_moments() {
        let t = 0.4f64.tanh();
        let table = NeighborhoodTable::new(3, 0.4).unwrap();
        let dist = table.aligned_distribution();
        let mean: f64 = dist.iter().map(|(m, p)| m * p).sum();
        let second: f64 = dist.iter().map(|(m, p)| m * m * p).sum();
        assert_abs_diff_eq!(mean, 3.0 * t, epsilon = 1e-14);
        assert_abs_diff_eq!(second, 3.0 * (1.0 + 2.0 * t * t), epsilon = 1e-13);
    }

    #[test]
    fn sampler_moments() {
        let m = 200_000;
        let mut rng = rng_from_seed(3);
        let s = neighborhood_sampler(3, 0.4, m, &mut rng).unwrap();
        let c: f64 = (0..m).map(|mu| (s.s0[mu] * s.row(mu)[0]) as f64).sum::<f64>() / m as f64;
        let t = 0.4f64.tanh();
        let sigma = ((1.0 - t * t) / m as f64).sqrt();
        assert!((c - t).abs() < 3.0 * sigma);
        let mean0: f64 = s.s0.iter().map(|&v| v as f64).sum::<f64>() / m as f64;
        assert!(mean0.abs() < 3.0 / (m as f64).sqrt());
    }

    #[test]
    fn zero_coupling_is_uniform() {
        let table = NeighborhoodTable::new(4, 0.0).unwrap();
        for k in 0..table.n_states() {
            assert_abs_diff_eq!(table.probability(k), 1.0 / 32.0, epsilon = 1e-16);
        }
    }

    #[test]
    fn negative_coupling_draws_are_gauge_images() {
        let a = neighborhood_sampler(3, 0.4, 100, &mut rng_from_seed(5)).unwrap();
        let b = neighborhood_sampler(3, -0.4, 100, &mut rng_from_seed(5)).unwrap();
        assert_eq!(a.s0, b.s0);
        for (x, y) in a.neighbors.iter().zip(&b.neighbors) {
            assert_eq!(*x, -*y);
        }
    }
}
