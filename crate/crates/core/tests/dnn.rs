// SPDX-License-Identifier: Apache-2.0

mod common;

use common::gradcheck::dnn_gradient_check;
use ffrnet::dnn::{
    forward, predict, split_dataset, train, train_with_hook, Dataset, Fold,
    MlpParams, Sample, TrainConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn backprop_matches_finite_differences() {
    for seed in 0..100 {
        let w = dnn_gradient_check(seed);
        assert!(w < 1e-4, "seed {seed}: relative error {w}");
    }
}

/// Straight-line evaluation written independently of the library.
#[allow(clippy::needless_range_loop)]
fn reference_forward(p: &MlpParams, x: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let n = p.layers.len();
    for (li, l) in p.layers.iter().enumerate() {
        let mut next = Vec::new();
        for r in 0..l.w.rows {
            let mut s = l.b[r];
            for c in 0..l.w.cols {
                s += l.w.data[r * l.w.cols + c] * a[c];
            }
            next.push(if li + 1 == n {
                1.0 / (1.0 + (-s).exp())
            } else if s > 0.0 {
                s
            } else {
                0.0
            });
        }
        a = next;
    }
    a[0]
}

#[test]
fn forward_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let p = MlpParams::standard(8, &mut rng);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = forward(&p, &x).unwrap();
        assert!((y - reference_forward(&p, &x)).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn output_is_strictly_inside_unit_interval(seed in any::<u64>(), scale in 0.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = MlpParams::standard(6, &mut rng);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let y = forward(&p, &x).unwrap();
        prop_assert!(y > 0.0 && y < 1.0);
    }
}

fn separable(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            let mut e: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let high = i % 2 == 0;
            e[0] = if high { rng.random_range(0.2..1.0) } else { rng.random_range(-1.0..-0.2) };
            let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            e.iter_mut().for_each(|v| *v /= norm);
            Sample {
                ff_name: format!("ff{i:03}"),
                embedding: e,
                target: if high { 0.9 } else { 0.1 },
                fold: Fold::Test,
            }
        })
        .collect();
    Dataset { rows }
}

#[test]
fn separable_targets_drop_ninety_percent() {
    let d = split_dataset(separable(100, 16, 4), 0.4, 4).unwrap();
    let m = train(&d, &TrainConfig::default()).unwrap();
    let h = &m.loss_history;
    assert!(h.len() <= 201);
    assert!(h.last().unwrap() <= &(0.1 * h[0]), "history {} -> {}", h[0], h.last().unwrap());
}

#[test]
fn training_is_seed_deterministic() {
    let d = split_dataset(separable(40, 8, 1), 0.4, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        seed: 5,
        ..TrainConfig::default()
    };
    assert_eq!(train(&d, &cfg).unwrap(), train(&d, &cfg).unwrap());
}

#[test]
fn test_fold_never_reaches_a_gradient() {
    let d = split_dataset(separable(30, 4, 3), 0.4, 3).unwrap();
    let mut counts = vec![0usize; d.rows.len()];
    train_with_hook(&d, &TrainConfig { epochs: 5, ..TrainConfig::default() }, |i| counts[i] += 1)
        .unwrap();
    for (r, c) in d.rows.iter().zip(&counts) {
        match r.fold {
            Fold::Train => assert_eq!(*c, 5),
            Fold::Test => assert_eq!(*c, 0),
        }
    }
}

#[test]
fn predictions_cover_both_folds() {
    let d = split_dataset(separable(10, 4, 3), 0.4, 3).unwrap();
    let m = train(&d, &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
    let p = predict(&m, &d).unwrap();
    assert_eq!(p.len(), 10);
    assert_eq!(p.iter().filter(|r| r.fold == Fold::Train).count(), 4);
    assert!(p.iter().all(|r| r.predicted > 0.0 && r.predicted < 1.0));
}

#[test]
fn no_divergence_at_max_learning_rate() {
    let d = split_dataset(separable(50, 16, 8), 0.4, 8).unwrap();
    let m = train(&d, &TrainConfig { learning_rate: 0.1, ..TrainConfig::default() }).unwrap();
    assert!(m.loss_history.iter().all(|l| l.is_finite()));
}
