mod common;

use common::{brute, one_hot_rows, random_prob_rows, rel_err, seeded, FD_STEP};
use ordinal_clm::losses::{qwk_c_loss, qwk_c_loss_and_gradient, qwk_metric, BatchProbabilities, PenalizationMatrix};
use ordinal_clm::metrics::{evaluate_all, top_k_ccr, ConfusionMatrix, Decision};
use ordinal_clm::Error;
use proptest::prelude::*;
use rand::Rng;

fn random_labels(rng: &mut impl Rng, n: usize, q: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..q)).collect()
}

#[test]
fn hard_predictions_reduce_to_one_minus_kappa() {
    let mut rng = seeded(7);
    let mut checked = 0;
    for _ in 0..1000 {
        let q = rng.random_range(2..=8);
        let n = rng.random_range(2..60);
        let labels = random_labels(&mut rng, n, q);
        let preds = random_labels(&mut rng, n, q);
        let Some(kappa) = brute::qwk(&labels, &preds, q) else { continue };
        let batch = BatchProbabilities::from_rows(&one_hot_rows(&preds, q), labels.clone()).unwrap();
        let w = PenalizationMatrix::quadratic(q).unwrap();
        let loss = qwk_c_loss(&batch, &w).unwrap();
        assert!((loss - (1.0 - kappa)).abs() <= 1e-12, "{loss} vs 1 - {kappa}");
        let cm = ConfusionMatrix::from_predictions(&labels, &preds, q).unwrap();
        assert!((qwk_metric(&cm).unwrap() - kappa).abs() <= 1e-12);
        checked += 1;
    }
    assert!(checked > 900);
}

#[test]
fn soft_loss_stays_in_range() {
    let mut rng = seeded(8);
    for _ in 0..10_000 {
        let q = rng.random_range(2..=8);
        let n = rng.random_range(2..40);
        let labels = random_labels(&mut rng, n, q);
        let batch = BatchProbabilities::from_rows(&random_prob_rows(&mut rng, n, q), labels).unwrap();
        let w = PenalizationMatrix::quadratic(q).unwrap();
        match qwk_c_loss(&batch, &w) {
            Ok(loss) => assert!((-1e-12..=2.0 + 1e-12).contains(&loss), "loss {loss}"),
            Err(Error::UndefinedLoss(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = seeded(9);
    for _ in 0..200 {
        let q = rng.random_range(2..=6);
        let n = rng.random_range(2..12);
        let labels = random_labels(&mut rng, n, q);
        let probs: Vec<f64> = random_prob_rows(&mut rng, n, q).concat();
        let w = PenalizationMatrix::quadratic(q).unwrap();
        let batch = BatchProbabilities::new_unnormalized(q, probs.clone(), labels.clone()).unwrap();
        let Ok((_, grad)) = qwk_c_loss_and_gradient(&batch, &w) else { continue };
        for i in 0..probs.len() {
            let eval = |d: f64| {
                let mut p = probs.clone();
                p[i] += d;
                qwk_c_loss(&BatchProbabilities::new_unnormalized(q, p, labels.clone()).unwrap(), &w).unwrap()
            };
            let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
            assert!(rel_err(grad[i], numeric) < 1e-6, "{} vs {numeric}", grad[i]);
        }
    }
}

#[test]
fn reversing_labels_and_predictions_preserves_metrics() {
    let mut rng = seeded(10);
    for _ in 0..500 {
        let q = rng.random_range(2..=7);
        let n = rng.random_range(2..50);
        let labels = random_labels(&mut rng, n, q);
        let rows = random_prob_rows(&mut rng, n, q);
        let rev_labels: Vec<usize> = labels.iter().map(|&t| q - 1 - t).collect();
        let rev_rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().rev().cloned().collect()).collect();
        let w = PenalizationMatrix::quadratic(q).unwrap();
        let a = qwk_c_loss(&BatchProbabilities::from_rows(&rows, labels.clone()).unwrap(), &w);
        let b = qwk_c_loss(&BatchProbabilities::from_rows(&rev_rows, rev_labels.clone()).unwrap(), &w);
        if let (Ok(a), Ok(b)) = (a, b) {
            assert!((a - b).abs() <= 1e-12);
        }
        let preds: Vec<usize> = rows.iter().map(|r| brute::argmax(r)).collect();
        let rev_preds: Vec<usize> = preds.iter().map(|&p| q - 1 - p).collect();
        let ka = brute::qwk(&labels, &preds, q);
        let cm = ConfusionMatrix::from_predictions(&rev_labels, &rev_preds, q).unwrap();
        match ka {
            Some(k) => assert!((qwk_metric(&cm).unwrap() - k).abs() <= 1e-12),
            None => assert!(matches!(qwk_metric(&cm), Err(Error::UndefinedMetric(_)))),
        }
    }
}

#[test]
fn metric_suite_matches_per_sample_definitions() {
    let mut rng = seeded(11);
    for _ in 0..1000 {
        let q = rng.random_range(2..=8);
        let n = rng.random_range(1..80);
        let labels = random_labels(&mut rng, n, q);
        let rows = random_prob_rows(&mut rng, n, q);
        let batch = BatchProbabilities::from_rows(&rows, labels.clone()).unwrap();
        let report = evaluate_all(&batch, Decision::Argmax).unwrap();
        let preds: Vec<usize> = rows.iter().map(|r| brute::argmax(r)).collect();
        match brute::qwk(&labels, &preds, q) {
            Some(k) => assert!((report.qwk.unwrap() - k).abs() <= 1e-12),
            None => assert!(report.qwk.is_none()),
        }
        assert!((report.ms - brute::ms(&labels, &preds, q)).abs() <= 1e-12);
        assert!((report.mae - brute::mae(&labels, &preds)).abs() <= 1e-12);
        assert!((report.ccr - brute::ccr(&labels, &preds)).abs() <= 1e-12);
        assert!((report.one_off - brute::one_off(&labels, &preds)).abs() <= 1e-12);
        assert!((report.top2 - brute::top_k(&rows, &labels, 2.min(q))).abs() <= 1e-12);
        assert!((report.top3 - brute::top_k(&rows, &labels, 3.min(q))).abs() <= 1e-12);
        assert!(report.ccr <= report.top2 && report.top2 <= report.top3);
        assert!(report.ccr <= report.one_off);
        assert_eq!(report.confusion.total(), n as u64);
        let perfect = report.confusion.is_diagonal();
        assert_eq!(report.mae == 0.0, perfect);
        assert_eq!(report.ccr == 1.0, perfect);
    }
}

#[test]
fn top_k_with_k_equal_q_is_one() {
    let mut rng = seeded(12);
    let rows = random_prob_rows(&mut rng, 30, 4);
    let labels = random_labels(&mut rng, 30, 4);
    let batch = BatchProbabilities::from_rows(&rows, labels).unwrap();
    assert_eq!(top_k_ccr(&batch, 4).unwrap(), 1.0);
}

#[test]
fn single_class_agreement_leaves_kappa_undefined() {
    let cm = ConfusionMatrix::from_counts(vec![vec![5, 0], vec![0, 0]]).unwrap();
    assert!(matches!(qwk_metric(&cm), Err(Error::UndefinedMetric(_))));
    let constant = ConfusionMatrix::from_counts(vec![vec![3, 0], vec![4, 0]]).unwrap();
    assert_eq!(qwk_metric(&constant).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn perfect_predictions_are_diagonal(labels in prop::collection::vec(0usize..5, 1..100)) {
        let cm = ConfusionMatrix::from_predictions(&labels, &labels, 5).unwrap();
        prop_assert!(cm.is_diagonal());
        prop_assert_eq!(ordinal_clm::metrics::mean_absolute_error(&cm).unwrap(), 0.0);
        prop_assert_eq!(ordinal_clm::metrics::ccr(&cm).unwrap(), 1.0);
    }
}
