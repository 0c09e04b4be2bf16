//! Ground-truth Ising models and samplers.

mod dataset;
mod exact;
mod graphs;
mod metropolis;
mod model;
mod neighborhood;

pub use dataset::{Provenance, SpinDataset, MAGIC};
pub use exact::{exact_distribution, state_index, state_spins, ExactDistribution, MAX_EXACT_SPINS};
pub use graphs::{gen_grid2d, gen_rr_graph, SignMode, DEFAULT_MAX_RESTARTS};
pub use metropolis::{metropolis_sample, DEFAULT_BURN_IN, DEFAULT_THIN};
pub use model::IsingModel;
pub use neighborhood::{
    neighborhood_expectation, neighborhood_sampler, NeighborhoodSamples, NeighborhoodTable,
    MAX_NEIGHBORHOOD_DEGREE,
};
