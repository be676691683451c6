use bankfuse::attention::{cab_forward, mha_wrap, sab_forward};
use bankfuse::bankio::{gen_synthetic, load_checkpoint, save_checkpoint};
use bankfuse::numeric::{sigmoid_scalar, Matrix};
use bankfuse::{
    evaluate, train, ArchitectureKind, CrossAttentionBlock, FeatureBankDataset, FusionModel,
    MultiHeadConfig, SelfAttentionBlock, SyntheticKind, SyntheticTaskSpec, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..=2.0))
}

fn heads(h: usize) -> MultiHeadConfig {
    MultiHeadConfig::new(h).unwrap()
}

#[test]
fn one_head_wrap_is_bitwise_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let sab = SelfAttentionBlock::random(6, heads(1), &mut rng).unwrap();
        let cab = CrossAttentionBlock::random(3, 6, heads(1), &mut rng).unwrap();
        let bank: Vec<Matrix> = (0..3).map(|_| uniform(2, 6, &mut rng)).collect();
        let wrapped_sab = mha_wrap(&sab, heads(1)).unwrap();
        let wrapped_cab = mha_wrap(&cab, heads(1)).unwrap();
        assert_eq!(
            sab_forward(&wrapped_sab, &bank[0]).unwrap(),
            sab_forward(&sab, &bank[0]).unwrap()
        );
        assert_eq!(
            cab_forward(&wrapped_cab, &bank).unwrap(),
            cab_forward(&cab, &bank).unwrap()
        );
    }
}

#[test]
fn zero_values_survive_head_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut sab = SelfAttentionBlock::random(4, heads(2), &mut rng).unwrap();
    let mut cab = CrossAttentionBlock::random(2, 4, heads(2), &mut rng).unwrap();
    for t in sab
        .heads_mut()
        .iter_mut()
        .chain(cab.branches_mut().iter_mut().flatten())
    {
        t.value = Matrix::zeros(2, 2);
    }
    let bank = vec![uniform(3, 4, &mut rng), uniform(3, 4, &mut rng)];
    assert_eq!(sab_forward(&sab, &bank[0]).unwrap(), bank[0]);
    assert_eq!(cab_forward(&cab, &bank).unwrap(), bank);
}

/// Single-head formulas applied slice by slice with plain loops.
#[test]
fn two_heads_match_per_slice_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 4;
    let hd = 2;
    let sab = SelfAttentionBlock::random(d, heads(2), &mut rng).unwrap();
    let cab = CrossAttentionBlock::random(2, d, heads(2), &mut rng).unwrap();
    let bank = vec![uniform(3, d, &mut rng), uniform(3, d, &mut rng)];

    let project = |x: &[f64], w: &Matrix| -> Vec<f64> {
        (0..hd)
            .map(|c| (0..hd).map(|k| x[k] * w.get(k, c)).sum())
            .collect()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let sab_out = sab_forward(&sab, &bank[0]).unwrap();
    let cab_out = cab_forward(&cab, &bank).unwrap();
    for r in 0..3 {
        for h in 0..2 {
            let cols = h * hd..(h + 1) * hd;
            let x = &bank[0].row_slice(r)[cols.clone()];
            let t = &sab.heads()[h];
            let w = sigmoid_scalar(dot(&project(x, &t.query), &project(x, &t.key)));
            let v = project(x, &t.value);
            for c in 0..hd {
                let expected = x[c] + w * v[c];
                assert!((sab_out.get(r, h * hd + c) - expected).abs() < 1e-14);
            }
            for i in 0..2 {
                let j = 1 - i;
                let xi = &bank[i].row_slice(r)[cols.clone()];
                let xj = &bank[j].row_slice(r)[cols.clone()];
                let (ti, tj) = (&cab.branches()[i][h], &cab.branches()[j][h]);
                let w = sigmoid_scalar(dot(&project(xi, &ti.query), &project(xj, &tj.key)));
                let v = project(xj, &tj.value);
                for c in 0..hd {
                    let expected = xi[c] + w * v[c];
                    assert!((cab_out[i].get(r, h * hd + c) - expected).abs() < 1e-14);
                }
            }
        }
    }
}

#[test]
fn permuting_bank_and_branches_permutes_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for h in [1, 2] {
        let cab = CrossAttentionBlock::random(3, 4, heads(h), &mut rng).unwrap();
        let bank: Vec<Matrix> = (0..3).map(|_| uniform(5, 4, &mut rng)).collect();
        let out = cab_forward(&cab, &bank).unwrap();
        for perm in [[1, 2, 0], [2, 1, 0], [0, 2, 1]] {
            let branches = perm.iter().map(|&p| cab.branches()[p].clone()).collect();
            let permuted = CrossAttentionBlock::from_heads(branches).unwrap();
            let bank_p: Vec<Matrix> = perm.iter().map(|&p| bank[p].clone()).collect();
            let out_p = cab_forward(&permuted, &bank_p).unwrap();
            for (k, &p) in perm.iter().enumerate() {
                for (a, b) in out_p[k].as_slice().iter().zip(out[p].as_slice()) {
                    assert!((a - b).abs() < 1e-12, "{perm:?}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn cross_weights_are_normalised_for_three_branches() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cab = CrossAttentionBlock::random(3, 4, heads(2), &mut rng).unwrap();
    let bank: Vec<Matrix> = (0..3).map(|_| uniform(4, 4, &mut rng)).collect();
    for per_head in cab.attention_weights(&bank).unwrap() {
        for w in per_head {
            assert_eq!(w.cols(), 2);
            for r in 0..w.rows() {
                assert!((w.row_slice(r).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn zeroed_values_reduce_every_kind_to_its_baseline() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in [2, 3] {
        let bank: Vec<Matrix> = (0..n).map(|_| uniform(6, 4, &mut rng)).collect();
        for kind in ArchitectureKind::ablation_set(n) {
            let mut model = FusionModel::new(kind, n, 4, 3, heads(2), 9).unwrap();
            model.zero_value_projections();
            model.head_bias = uniform(1, 3, &mut rng);
            let mut baseline =
                FusionModel::new(kind.residual_baseline(), n, 4, 3, heads(2), 1).unwrap();
            baseline.head_weight = model.head_weight.clone();
            baseline.head_bias = model.head_bias.clone();
            assert_eq!(
                model.forward(&bank).unwrap(),
                baseline.forward(&bank).unwrap(),
                "{kind}"
            );
        }
    }
}

fn separable(seed: u64) -> (FeatureBankDataset, FeatureBankDataset) {
    gen_synthetic(&SyntheticTaskSpec {
        kind: SyntheticKind::Separable,
        dim: 8,
        branches: 2,
        classes: 2,
        train_samples: 400,
        test_samples: 200,
        noise: 0.3,
        seed,
    })
    .unwrap()
}

fn short_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        lr_drop_epochs: vec![],
        ..TrainConfig::default()
    }
}

#[test]
fn single_branch_learns_separable_task() {
    let (train_set, test_set) = separable(1);
    let mut model = FusionModel::new(ArchitectureKind::Single(0), 2, 8, 2, heads(1), 3).unwrap();
    let metrics = train(&mut model, &train_set, &short_config(50)).unwrap();
    assert!(metrics.accuracy >= 0.99, "{}", metrics.accuracy);
    assert_eq!(metrics.epoch_losses.len(), 50);
    assert!(evaluate(&model, &test_set).unwrap().accuracy >= 0.95);
}

#[test]
fn plain_sgd_loss_trends_down_on_separable_task() {
    let (train_set, _) = separable(2);
    let config = TrainConfig {
        momentum: 0.0,
        ..short_config(40)
    };
    for kind in ArchitectureKind::ablation_set(2) {
        let mut model = FusionModel::new(kind, 2, 8, 2, heads(1), 4).unwrap();
        let metrics = train(&mut model, &train_set, &config).unwrap();
        assert_eq!(metrics.loss_trend_violation(5, 10, 0.05), None, "{kind}");
    }
}

#[test]
fn zero_epochs_leaves_model_untouched() {
    let (train_set, _) = separable(3);
    let fresh = FusionModel::new(ArchitectureKind::Sa2Ca, 2, 8, 2, heads(1), 3).unwrap();
    let mut model = fresh.clone();
    let metrics = train(&mut model, &train_set, &short_config(0)).unwrap();
    assert!(metrics.epoch_losses.is_empty());
    assert_eq!(model, fresh);
}

#[test]
fn training_replays_bitwise() {
    let (train_set, _) = separable(4);
    let config = TrainConfig {
        label_fraction: 0.3,
        standardize: true,
        ..short_config(5)
    };
    let run = || {
        let mut model = FusionModel::new(ArchitectureKind::Sca, 2, 8, 2, heads(2), 8).unwrap();
        let metrics = train(&mut model, &train_set, &config).unwrap();
        (model, metrics)
    };
    let (m1, r1) = run();
    let (m2, r2) = run();
    assert_eq!(r1.to_csv(), r2.to_csv());
    for (a, b) in m1.params().iter().zip(m2.params()) {
        let bits = |m: &Matrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn evaluation_is_pure_and_counts_correctly() {
    let (train_set, _) = gen_synthetic(&SyntheticTaskSpec {
        kind: SyntheticKind::Redundant,
        dim: 4,
        branches: 2,
        classes: 4,
        train_samples: 400,
        test_samples: 0,
        noise: 0.0,
        seed: 5,
    })
    .unwrap();
    let per_class: Vec<usize> = (0..4)
        .map(|c| train_set.labels().iter().filter(|&&l| l == c).count())
        .collect();

    // Zero weights and a bias favouring class 2 predict 2 everywhere.
    let mut constant =
        FusionModel::new(ArchitectureKind::ConcatBaseline, 2, 4, 4, heads(1), 0).unwrap();
    constant.head_weight = Matrix::zeros(8, 4);
    constant.head_bias = Matrix::row(vec![0.0, 0.0, 1.0, 0.0]);
    let before = constant.clone();
    let first = evaluate(&constant, &train_set).unwrap();
    let second = evaluate(&constant, &train_set).unwrap();
    assert_eq!(first, second);
    assert_eq!(constant, before);
    assert_eq!(first.accuracy, per_class[2] as f64 / train_set.len() as f64);

    // At zero noise entry 0 is exactly its class prototype, so scoring by
    // the prototypes themselves is a perfect classifier.
    let mut protos = vec![vec![0.0; 4]; 4];
    for s in train_set.samples() {
        protos[s.label] = s.features[0].clone();
    }
    let mut oracle = FusionModel::new(ArchitectureKind::Single(0), 2, 4, 4, heads(1), 0).unwrap();
    oracle.head_weight = Matrix::from_fn(4, 4, |r, c| protos[c][r]);
    assert_eq!(evaluate(&oracle, &train_set).unwrap().accuracy, 1.0);
}

#[test]
fn balanced_constant_prediction_scores_one_over_c() {
    let samples = (0..12)
        .map(|i| bankfuse::Sample {
            id: format!("s{i}"),
            label: i % 3,
            features: vec![vec![i as f64]],
        })
        .collect();
    let data = FeatureBankDataset::new(1, 1, 3, Default::default(), samples).unwrap();
    let mut model = FusionModel::new(ArchitectureKind::Single(0), 1, 1, 3, heads(1), 0).unwrap();
    model.head_weight = Matrix::zeros(1, 3);
    assert_eq!(evaluate(&model, &data).unwrap().accuracy, 1.0 / 3.0);
}

fn nearest(centroids: &[(Vec<f64>, usize)], x: &[f64]) -> usize {
    let dist = |c: &[f64]| c.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    centroids
        .iter()
        .min_by(|a, b| dist(&a.0).total_cmp(&dist(&b.0)))
        .map(|c| c.1)
        .unwrap()
}

fn mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; rows[0].len()];
    for r in rows {
        m.iter_mut()
            .zip(r)
            .for_each(|(a, b)| *a += b / rows.len() as f64);
    }
    m
}

#[test]
fn xor_task_defeats_single_bank_centroids() {
    let (train_set, test_set) = gen_synthetic(&SyntheticTaskSpec {
        kind: SyntheticKind::ComplementaryXor,
        dim: 8,
        branches: 2,
        classes: 2,
        train_samples: 2000,
        test_samples: 1000,
        noise: 0.0,
        seed: 6,
    })
    .unwrap();
    let accuracy = |centroids: &[(Vec<f64>, usize)],
                    view: &dyn Fn(&bankfuse::Sample) -> Vec<f64>| {
        let hits = test_set
            .samples()
            .iter()
            .filter(|s| nearest(centroids, &view(s)) == s.label)
            .count();
        hits as f64 / test_set.len() as f64
    };

    let bank0 = |s: &bankfuse::Sample| s.features[0].clone();
    let class_centroids: Vec<(Vec<f64>, usize)> = (0..2)
        .map(|c| {
            let rows: Vec<Vec<f64>> = train_set
                .samples()
                .iter()
                .filter(|s| s.label == c)
                .map(bank0)
                .collect();
            (mean(&rows), c)
        })
        .collect();
    let single = accuracy(&class_centroids, &bank0);
    assert!(single <= 0.55, "{single}");

    // One centroid per latent cell, identified by the exact entry vectors;
    // the parity map assigns each cell its label.
    let joint = |s: &bankfuse::Sample| s.features.concat();
    let mut cells: Vec<(Vec<f64>, usize)> = Vec::new();
    for s in train_set.samples() {
        let v = joint(s);
        match cells.iter().find(|c| c.0 == v) {
            Some(c) => assert_eq!(c.1, s.label),
            None => cells.push((v, s.label)),
        }
    }
    assert_eq!(cells.len(), 4);
    assert_eq!(accuracy(&cells, &joint), 1.0);
}

#[test]
fn checkpoint_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (train_set, _) = separable(7);
    let mut model = FusionModel::new(ArchitectureKind::Ca2Sa, 2, 8, 2, heads(4), 12).unwrap();
    train(
        &mut model,
        &train_set,
        &TrainConfig {
            standardize: true,
            ..short_config(2)
        },
    )
    .unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&model, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(
        back.forward(&train_set.bank_matrices()).unwrap(),
        model.forward(&train_set.bank_matrices()).unwrap()
    );
}
