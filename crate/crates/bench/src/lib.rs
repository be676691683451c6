//! Shared fixtures for the benchmarks.

use bankfuse::{FeatureBankDataset, SyntheticKind, SyntheticTaskSpec};

/// Training split of a small complementary-xor bank.
pub fn xor_bank(samples: usize, dim: usize) -> FeatureBankDataset {
    let spec = SyntheticTaskSpec {
        kind: SyntheticKind::ComplementaryXor,
        dim,
        branches: 2,
        classes: 2,
        train_samples: samples,
        test_samples: 0,
        noise: 0.1,
        seed: 1,
    };
    bankfuse::bankio::gen_synthetic(&spec)
        .expect("valid synthetic spec")
        .0
}
