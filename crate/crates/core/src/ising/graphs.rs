//! Ground-truth graph families.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::IsingModel;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_RESTARTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    /// Every coupling equals +K0.
    #[default]
    Uniform,
    /// Each coupling is ±K0 with equal probability.
    RandomSign,
}

/// Random d-regular graph by configuration-model pairing, restarting on any
/// self-loop or multi-edge.
pub fn gen_rr_graph<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    k0: f64,
    sign_mode: SignMode,
    max_restarts: usize,
    rng: &mut R,
) -> Result<IsingModel> {
    if (n * d) % 2 != 0 {
        return Err(Error::Graph(format!("N·d = {} is odd; no {d}-regular graph on {n} nodes", n * d)));
    }
    if n <= d {
        return Err(Error::Graph(format!("need N > d, got N = {n}, d = {d}")));
    }
    if k0 == 0.0 {
        return Err(Error::Graph("K0 must be nonzero".into()));
    }
    let mut stubs: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, d)).collect();
    let mut seen = std::collections::HashSet::with_capacity(n * d);
    'attempt: for _ in 0..max_restarts.max(1) {
        stubs.shuffle(rng);
        seen.clear();
        let mut pairs = Vec::with_capacity(n * d / 2);
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !seen.insert((a, b)) {
                continue 'attempt;
            }
            pairs.push((a, b));
        }
        let edges = pairs
            .into_iter()
            .map(|(a, b)| {
                let sign = match sign_mode {
                    SignMode::Uniform => 1.0,
                    SignMode::RandomSign => {
                        if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                (a, b, sign * k0)
            })
            .collect();
        return IsingModel::new(n, edges);
    }
    Err(Error::Graph(format!(
        "no simple {d}-regular pairing on {n} nodes after {max_restarts} restarts"
    )))
}

/// L×L periodic square lattice with uniform coupling.
pub fn gen_grid2d(l: usize, k0: f64) -> Result<IsingModel> {
    if l < 3 {
        return Err(Error::Graph(format!("grid side must be at least 3, got {l}")));
    }
    let idx = |x: usize, y: usize| (y % l) * l + (x % l);
    let mut edges = Vec::with_capacity(2 * l * l);
    for y in 0..l {
        for x in 0..l {
            edges.push((idx(x, y), idx(x + 1, y), k0));
            edges.push((idx(x, y), idx(x, y + 1), k0));
        }
    }
    IsingModel::new(l * l, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn four_nodes_degree_three_is_complete() {
        let mut rng = rng_from_seed(1);
        let g = gen_rr_graph(4, 3, 0.4, SignMode::Uniform, 1000, &mut rng).unwrap();
        assert_eq!(g.edges().len(), 6);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(g.coupling(i, j), 0.4);
                }
            }
        }
    }

    #[test]
    fn parity_violation() {
        let mut rng = rng_from_seed(1);
        assert!(matches!(
            gen_rr_graph(5, 3, 0.4, SignMode::Uniform, 10, &mut rng),
            Err(Error::Graph(_))
        ));
    }

    #[test]
    fn regular_and_simple() {
        let mut rng = rng_from_seed(9);
        let g = gen_rr_graph(200, 3, 0.4, SignMode::RandomSign, 1000, &mut rng).unwrap();
        assert!(g.degrees().iter().all(|&k| k == 3));
        assert_eq!(g.edges().len(), 300);
        assert!(g.edges().iter().all(|&(i, j, c)| i < j && c.abs() == 0.4));
        let pos = g.edges().iter().filter(|e| e.2 > 0.0).count();
        assert!(pos > 100 && pos < 200);
    }

    #[test]
    fn grid_structure() {
        let g = gen_grid2d(15, 0.2).unwrap();
        assert_eq!(g.n(), 225);
        assert_eq!(g.edges().len(), 2 * 225);
        assert!(g.degrees().iter().all(|&k| k == 4));
        let small = gen_grid2d(3, 0.2).unwrap();
        let mut nb: Vec<usize> = small.neighbors(0).iter().map(|x| x.0).collect();
        nb.sort();
        assert_eq!(nb, vec![1, 2, 3, 6]);
        assert!(gen_grid2d(2, 0.2).is_err());
    }
}
