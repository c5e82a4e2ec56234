//! Shared inputs for the benchmarks.

use nestune::harness::{fixture, Fixture};
use nestune::PartialSchedule;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A bundled fixture; panics on an unknown name.
pub fn load(name: &str) -> Fixture {
    fixture(name).expect("bundled fixture")
}

/// `n` uniformly random complete schedules, fixed by `seed`.
pub fn random_schedules(f: &Fixture, n: usize, seed: u64) -> Vec<PartialSchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = PartialSchedule::initial(&f.pipeline);
    (0..n).map(|_| root.random_completion(&mut rng)).collect()
}
