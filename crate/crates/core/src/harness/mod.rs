//! Workload harness: seeded generators, the two execution drivers, result
//! verification, and the metrics report.

mod analyze;
mod driver;
mod gen;
mod report;

pub use analyze::analyze_report;
pub use driver::{run_deterministic, run_threaded, RunOutcome, TxnResult};
pub use gen::{random_workload, GenConfig};
pub use report::{run_workload, MetricsReport, RunConfig, Verdict};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::access::{AccessMode, AccessVector};

/// Deterministic RNG used everywhere a seed appears; the stream is stable
/// across platforms, so seeded runs and tests reproduce exactly.
pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly random access vector of the given dimension.
pub fn random_vector(dim: usize, rng: &mut impl Rng) -> AccessVector {
    AccessVector::new(
        (0..dim)
            .map(|_| AccessMode::ALL[rng.random_range(0..3)])
            .collect(),
    )
}

/// Random componentwise lowering of `v`: each mode is replaced by a
/// uniformly chosen mode no greater than it.
pub fn random_lowering(v: &AccessVector, rng: &mut impl Rng) -> AccessVector {
    AccessVector::new(
        v.iter()
            .map(|m| {
                let ceiling = match m {
                    AccessMode::Null => 0,
                    AccessMode::Read => 1,
                    AccessMode::Write => 2,
                };
                AccessMode::ALL[rng.random_range(0..=ceiling)]
            })
            .collect(),
    )
}
