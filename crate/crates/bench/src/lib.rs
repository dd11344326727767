//! Seeded fixtures shared by the benchmarks.

use fjguard_core::graph::{preferential_attachment, random_opinions, random_row_stochastic};
use fjguard_core::rng::derive_seed;
use fjguard_core::{FjSystem, OpinionVector, StubbornnessVector};

/// A preferential-attachment system with `n` users and innate opinions in `(0.6, 1)`.
pub fn system(n: usize, seed: u64) -> (FjSystem, OpinionVector) {
    let graph = preferential_attachment(n, 5, derive_seed(seed, "graph")).expect("valid generator args");
    let w = random_row_stochastic(&graph, derive_seed(seed, "weights")).expect("graph has edges");
    let alpha =
        StubbornnessVector::random(n, 0.0, 1.0, derive_seed(seed, "stubbornness")).expect("valid range");
    let s0 = random_opinions(n, 0.6, 1.0, derive_seed(seed, "opinions")).expect("valid range");
    (FjSystem::new(w, alpha).expect("valid system"), s0)
}
