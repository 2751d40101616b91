//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vspfit_core::observation::simulate_dataset;
use vspfit_core::{ActorSubset, Bdt, ObsModel, RankDataset};

/// A prior draw over actors `0..n`, fixed by `seed`.
pub fn random_tree(n: usize, q: f64, seed: u64) -> Bdt {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Bdt::sample_prior(n, q, &mut rng).expect("n > 0")
}

/// `lists` full-length lists simulated from `tree`.
pub fn full_lists(tree: &Bdt, model: ObsModel, lists: usize, seed: u64) -> RankDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all = ActorSubset::new(tree.tree().actors()).expect("distinct actors");
    let ms = vec![all; lists];
    simulate_dataset(tree.tree(), model, 0.1, 0.5, &ms, &mut rng).expect("tree actors")
}
