//! Deterministic seed splitting.
//!
//! Every random stream in the crate is derived from a master seed plus a
//! purpose tag and a path of indices, so theory and experiment cells never
//! share a stream and any single cell can be replayed from its recorded seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags partitioning the seed space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Graph = 1,
    Sampling = 2,
    Center = 3,
    Theory = 4,
    Diagnostics = 5,
    Inactive = 6,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derive a child seed from `master`, a purpose tag and an index path.
pub fn derive_seed(master: u64, purpose: Purpose, path: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(purpose as u64));
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    h
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derive_rng(master: u64, purpose: Purpose, path: &[u64]) -> Rng {
    rng_from_seed(derive_seed(master, purpose, path))
}
