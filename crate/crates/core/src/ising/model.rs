use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A zero-field Ising model P(s) ∝ exp(Σ_{i<j} J_ij s_i s_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    n: usize,
    /// (i, j, J_ij) with i < j.
    edges: Vec<(usize, usize, f64)>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl IsingModel {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut normalised = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for (i, j, coupling) in edges {
            if i == j {
                return Err(Error::Graph(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::Graph(format!("edge ({i}, {j}) out of range for N = {n}")));
            }
            if coupling == 0.0 || !coupling.is_finite() {
                return Err(Error::Graph(format!("edge ({i}, {j}) has invalid coupling {coupling}")));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            if adjacency[a].iter().any(|&(k, _)| k == b) {
                return Err(Error::Graph(format!("duplicate edge ({a}, {b})")));
            }
            adjacency[a].push((b, coupling));
            adjacency[b].push((a, coupling));
            normalised.push((a, b, coupling));
        }
        Ok(Self {
            n,
            edges: normalised,
            adjacency,
        })
    }

    /// A model with no couplings.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// J*_ij, zero when i and j are not connected.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map_or(0.0, |&(_, c)| c)
    }

    /// Σ_j J_ij s_j.
    #[inline]
    pub fn local_field(&self, i: usize, spins: &[i8]) -> f64 {
        self.adjacency[i]
            .iter()
            .map(|&(j, c)| c * spins[j] as f64)
            .sum()
    }

    pub fn energy(&self, spins: &[i8]) -> f64 {
        -self
            .edges
            .iter()
            .map(|&(i, j, c)| c * (spins[i] * spins[j]) as f64)
            .sum::<f64>()
    }

    /// Rebuild adjacency after deserialisation.
    pub fn reindexed(self) -> Result<Self> {
        Self::new(self.n, self.edges)
    }

    /// Gauge transform: flip the spins in `flip` and the couplings incident
    /// to exactly one flipped spin.
    pub fn gauge_flip(&self, flip: &[bool]) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|&(i, j, c)| if flip[i] != flip[j] { (i, j, -c) } else { (i, j, c) })
            .collect();
        Self::new(self.n, edges).expect("gauge flip preserves validity")
    }
}
