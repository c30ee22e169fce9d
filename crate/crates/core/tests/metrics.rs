// SPDX-License-Identifier: Apache-2.0

use ffrnet::dnn::{Fold, Prediction};
use ffrnet::metrics::{emit_report, mae, r_squared, MetricsError, PredictionReport, StageTiming};
use proptest::prelude::*;

#[test]
fn worked_examples() {
    assert_eq!(mae(&[0.25, 0.5, 1.0], &[0.25, 0.5, 1.0]).unwrap(), 0.0);
    assert!((mae(&[0.0, 1.0], &[1.0, 0.0]).unwrap() - 1.0).abs() <= 1e-12);
    assert!((mae(&[0.2, 0.4, 0.9], &[0.1, 0.5, 0.8]).unwrap() - 0.1).abs() <= 1e-12);
    assert!((r_squared(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0]).unwrap() - 0.5).abs() <= 1e-12);
}

fn vectors() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
    })
}

proptest! {
    #[test]
    fn perfect_prediction_scores_one((t, _) in vectors()) {
        prop_assume!(t.iter().any(|&v| v != t[0]));
        prop_assert_eq!(r_squared(&t, &t).unwrap(), 1.0);
        prop_assert_eq!(mae(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn mean_prediction_scores_zero((t, _) in vectors()) {
        prop_assume!(t.iter().any(|&v| v != t[0]));
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let r2 = r_squared(&t, &vec![mean; t.len()]).unwrap();
        prop_assert!(r2.abs() < 1e-12, "{}", r2);
    }

    #[test]
    fn mae_is_a_symmetric_bounded_mean((t, p) in vectors()) {
        let m = mae(&t, &p).unwrap();
        prop_assert_eq!(m, mae(&p, &t).unwrap());
        let max = t.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!((0.0..=max).contains(&m));
    }

    #[test]
    fn r_squared_at_most_one((t, p) in vectors()) {
        prop_assume!(t.iter().any(|&v| v != t[0]));
        prop_assert!(r_squared(&t, &p).unwrap() <= 1.0);
    }
}

#[test]
fn degenerate_inputs() {
    assert_eq!(mae(&[], &[]), Err(MetricsError::Empty));
    assert_eq!(r_squared(&[0.3], &[0.3]), Err(MetricsError::TooFew));
    assert_eq!(r_squared(&[0.3, 0.3], &[0.1, 0.2]), Err(MetricsError::ZeroVariance));
    assert!(matches!(mae(&[0.1, 0.2], &[0.1]), Err(MetricsError::LengthMismatch { .. })));
}

#[test]
fn report_files() {
    let rows = vec![
        Prediction { ff_name: "q2".into(), fold: Fold::Test, target: 0.5, predicted: 0.25 },
        Prediction { ff_name: "q1".into(), fold: Fold::Test, target: 0.0, predicted: 0.25 },
        Prediction { ff_name: "q0".into(), fold: Fold::Train, target: 1.0, predicted: 1.0 },
    ];
    let timing = StageTiming { campaign: 10.0, embed: 0.25, train: 0.5, predict: 0.25 };
    let r = PredictionReport::new(rows, Fold::Test, Some(timing)).unwrap();
    assert_eq!(r.mae, 0.25);
    assert_eq!(r.r2, Some(0.0));
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&r, dir.path()).unwrap();
    assert_eq!(files.len(), 4);
    let read = |n: &str| std::fs::read_to_string(dir.path().join(n)).unwrap();
    assert_eq!(
        read("predictions.csv"),
        "ff_name,fold,target_ffr,predicted_ffr\nq0,train,1,1\nq1,test,0,0.25\nq2,test,0.5,0.25\n"
    );
    assert_eq!(read("plot.csv"), "index,ff_name,target_ffr,predicted_ffr\n0,q1,0,0.25\n1,q2,0.5,0.25\n");
    assert_eq!(read("metrics.csv"), "fold,rows,mae,r2\ntest,2,0.25,0\n");
    assert_eq!(
        read("timing.csv"),
        "stage,wallclock_s\ncampaign,10.000000\nembed,0.250000\ntrain,0.500000\npredict,0.250000\nprediction_flow,1.000000\nratio,0.100000\n"
    );
}
