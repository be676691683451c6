use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use bankfuse::{train, ArchitectureKind, FusionModel, MultiHeadConfig, TrainConfig};
use bankfuse_bench::xor_bank;

fn forward(c: &mut Criterion) {
    let data = xor_bank(128, 8);
    let bank = data.bank_matrices();
    for kind in [
        ArchitectureKind::ConcatBaseline,
        ArchitectureKind::Sa2Ca,
        ArchitectureKind::Sca,
    ] {
        let model = FusionModel::new(kind, 2, 8, 2, MultiHeadConfig::single(), 3).unwrap();
        c.bench_function(&format!("forward {kind} batch 128"), |b| {
            b.iter(|| model.forward(black_box(&bank)).unwrap())
        });
    }
}

fn epoch(c: &mut Criterion) {
    let data = xor_bank(512, 8);
    let config = TrainConfig {
        epochs: 1,
        lr_drop_epochs: vec![],
        ..TrainConfig::default()
    };
    for heads in [1, 4] {
        let mha = MultiHeadConfig::new(heads).unwrap();
        c.bench_function(&format!("train epoch SA2CA h={heads} n=512"), |b| {
            b.iter(|| {
                let mut model = FusionModel::new(ArchitectureKind::Sa2Ca, 2, 8, 2, mha, 3).unwrap();
                train(&mut model, black_box(&data), &config).unwrap()
            })
        });
    }
}

criterion_group!(benches, forward, epoch);
criterion_main!(benches);
