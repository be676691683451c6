use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use bankfuse::infotheory::{check_dpi, mutual_information, random_joint, verify_theorem1, Channel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn information(c: &mut Criterion) {
    let dist = random_joint(&[4, 4, 4, 4], 9).unwrap();
    c.bench_function("mutual information 4^4", |b| {
        b.iter(|| mutual_information(black_box(&dist), &[0], &[1, 2, 3]).unwrap())
    });
    c.bench_function("theorem check N=3 arity 4", |b| {
        b.iter(|| verify_theorem1(black_box(&dist)).unwrap())
    });
    let pair = random_joint(&[4, 4], 2).unwrap();
    let channel = Channel::random(4, 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    c.bench_function("dpi check 4x4", |b| {
        b.iter(|| check_dpi(black_box(&pair), &channel).unwrap())
    });
}

criterion_group!(benches, information);
criterion_main!(benches);
