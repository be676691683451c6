use bankfuse::bankio::Split;
use bankfuse::infotheory::{
    check_dpi, conditional_mi, mutual_information, random_joint, random_joint_with, Channel,
    JointDistribution,
};
use bankfuse::numeric::{sigmoid_scalar, Graph, Matrix};
use bankfuse::{FeatureBankDataset, Sample};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn softmax(m: Matrix) -> Matrix {
    let mut g = Graph::new();
    let x = g.input(m);
    let s = g.softmax_row(x).unwrap();
    g.value(s).clone()
}

fn matrix(
    rows: usize,
    cols: usize,
    range: std::ops::RangeInclusive<f64>,
) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(range, rows * cols).prop_map(move |v| Matrix::new(rows, cols, v).unwrap())
}

fn arities() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=4, 3..=4)
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(m in matrix(3, 5, -500.0..=500.0)) {
        let s = softmax(m);
        for r in 0..s.rows() {
            let row = s.row_slice(r);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    /// Spread kept below ~36 so the smallest weight is representable
    /// beside the largest.
    #[test]
    fn softmax_entries_strictly_inside_unit_interval(m in matrix(3, 5, -15.0..=15.0)) {
        let s = softmax(m);
        prop_assert!(s.as_slice().iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn softmax_is_shift_invariant(m in matrix(2, 4, -5.0..=5.0), c in -100.0f64..100.0) {
        let shifted = m.map(|x| x + c);
        let (a, b) = (softmax(m), softmax(shifted));
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }

    /// Open interval wherever `1 - sigmoid(x)` is representable next to 1.
    #[test]
    fn sigmoid_strictly_inside_unit_interval(x in -700.0f64..36.0) {
        let s = sigmoid_scalar(x);
        prop_assert!(s > 0.0 && s < 1.0, "{x} -> {s}");
    }

    #[test]
    fn sigmoid_never_leaves_closed_interval(x in prop::num::f64::NORMAL) {
        let s = sigmoid_scalar(x);
        prop_assert!(s.is_finite() && (0.0..=1.0).contains(&s));
    }

    #[test]
    fn mutual_information_is_symmetric_and_bounded(ar in arities(), seed in any::<u64>()) {
        let d = random_joint(&ar, seed).unwrap();
        let ab = mutual_information(&d, &[0], &[1, 2]).unwrap();
        let ba = mutual_information(&d, &[1, 2], &[0]).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!(ab >= 0.0);
        let bound = d.entropy(&[0]).unwrap().min(d.entropy(&[1, 2]).unwrap());
        prop_assert!(ab <= bound + 1e-12);
    }

    #[test]
    fn chain_rule(ar in arities(), seed in any::<u64>()) {
        let d = random_joint(&ar, seed).unwrap();
        let joint = mutual_information(&d, &[0], &[1, 2]).unwrap();
        let first = mutual_information(&d, &[0], &[1]).unwrap();
        let rest = conditional_mi(&d, &[2], &[0], &[1]).unwrap();
        prop_assert!((joint - first - rest).abs() < 1e-10);
    }

    #[test]
    fn data_processing(ay in 2usize..=4, ax in 2usize..=4, az in 2usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_joint_with(&[ay, ax], &mut rng).unwrap();
        let ch = Channel::random(ax, az, &mut rng).unwrap();
        let report = check_dpi(&d, &ch).unwrap();
        prop_assert!(report.holds, "{report:?}");
    }

    #[test]
    fn bank_round_trip(
        n in 1usize..4,
        d in 1usize..5,
        c in 2usize..5,
        rows in prop::collection::vec((any::<u32>(), prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 16)), 0..20),
    ) {
        let samples: Vec<Sample> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (label, vals))| Sample {
                id: format!("r{i}"),
                label: label as usize % c,
                features: (0..n).map(|k| (0..d).map(|j| vals[(k * d + j) % vals.len()]).collect()).collect(),
            })
            .collect();
        let ds = FeatureBankDataset::new(n, d, c, Split::Test, samples).unwrap();
        let text = ds.to_csv();
        let back = FeatureBankDataset::parse(&text).unwrap();
        prop_assert_eq!(back.to_csv(), text);
        prop_assert_eq!(back, ds);
    }
}

#[test]
fn sweep_of_random_joints_is_normalised() {
    for seed in 0..1000u64 {
        let ar = [2 + (seed % 3) as usize, 2, 3];
        let d = random_joint(&ar, seed).unwrap();
        let total: f64 = d.probs().iter().sum();
        assert!((total - 1.0).abs() <= 1e-12, "seed {seed}: {total}");
        assert!(d.probs().iter().all(|&p| p > 0.0));
    }
}

#[test]
fn distribution_rejects_bad_tables() {
    assert!(JointDistribution::new(vec![2, 2], vec![0.5, 0.5, 0.1, -0.1]).is_err());
    assert!(JointDistribution::new(vec![2, 2], vec![0.25; 3]).is_err());
    assert!(JointDistribution::new(vec![2, 2], vec![0.3; 4]).is_err());
}
