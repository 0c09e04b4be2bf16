//! Single-site Metropolis–Hastings sampler.

use rand::Rng;

use super::{IsingModel, Provenance, SpinDataset};
use crate::error::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_THIN: usize = 10;

/// Sweep = N single-site proposals at uniformly random sites.
fn sweep<R: Rng + ?Sized>(model: &IsingModel, spins: &mut [i8], rng: &mut R) {
    let n = spins.len();
    for _ in 0..n {
        let i = rng.random_range(0..n);
        let delta = 2.0 * spins[i] as f64 * model.local_field(i, spins);
        if delta <= 0.0 || rng.random::<f64>() < (-delta).exp() {
            spins[i] = -spins[i];
        }
    }
}

pub fn metropolis_sample<R: Rng + ?Sized>(
    model: &IsingModel,
    m: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
) -> Result<SpinDataset> {
    if burn_in == 0 || thin == 0 {
        return Err(Error::Domain("burn-in and thinning must be at least one sweep".into()));
    }
    if m == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let n = model.n();
    let mut spins: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    for _ in 0..burn_in {
        sweep(model, &mut spins, rng);
    }
    let mut data = Vec::with_capacity(m * n);
    for _ in 0..m {
        for _ in 0..thin {
            sweep(model, &mut spins, rng);
        }
        data.extend_from_slice(&spins);
    }
    let provenance = Provenance {
        sampler: "metropolis".into(),
        burn_in,
        thin,
        ..Provenance::default()
    };
    SpinDataset::new(n, m, data, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::exact_distribution;
    use crate::rng::rng_from_seed;

    #[test]
    fn free_spins_are_fair() {
        let model = IsingModel::empty(5);
        let data = metropolis_sample(&model, 20_000, 10, 1, &mut rng_from_seed(2)).unwrap();
        for i in 0..5 {
            let mean = data.column_mean(i);
            assert!(mean.abs() < 3.0 / (20_000f64).sqrt(), "spin {i}: {mean}");
        }
    }

    #[test]
    fn two_spin_correlation() {
        let model = IsingModel::new(2, vec![(0, 1, 0.6)]).unwrap();
        let m = 100_000;
        let data = metropolis_sample(&model, m, 100, 10, &mut rng_from_seed(8)).unwrap();
        let c: f64 = (0..m).map(|mu| (data.row(mu)[0] * data.row(mu)[1]) as f64).sum::<f64>() / m as f64;
        let t = 0.6f64.tanh();
        assert!((c - t).abs() < 3.0 * ((1.0 - t * t) / m as f64).sqrt());
    }

    #[test]
    fn deterministic_for_seed() {
        let model = IsingModel::new(3, vec![(0, 1, 0.3), (1, 2, 0.3)]).unwrap();
        let a = metropolis_sample(&model, 50, 5, 2, &mut rng_from_seed(4)).unwrap();
        let b = metropolis_sample(&model, 50, 5, 2, &mut rng_from_seed(4)).unwrap();
        assert_eq!(a.spins(), b.spins());
    }

    #[test]
    fn small_model_distribution() {
        let model = IsingModel::new(4, vec![(0, 1, 0.5), (1, 2, -0.4), (2, 3, 0.7), (0, 3, 0.2)]).unwrap();
        let exact = exact_distribution(&model).unwrap();
        let data = metropolis_sample(&model, 100_000, 100, 5, &mut rng_from_seed(12)).unwrap();
        assert!(exact.total_variation(&data) < 0.02);
    }

    #[test]
    fn rejects_zero_thinning() {
        let model = IsingModel::empty(2);
        assert!(metropolis_sample(&model, 10, 1, 0, &mut rng_from_seed(1)).is_err());
    }
}
