mod common;

use common::{auc_by_pairs, rng};
use proptest::prelude::*;
use rand::Rng;
use trendlab::eval::*;
use trendlab::models::Prediction;

#[test]
fn confusion_by_hand() {
    let y = [1, 1, 1, 0, 0, 0, 0, 1];
    let p = [1, 0, 1, 0, 1, 0, 0, 1];
    let cm = confusion(&y, &p).unwrap();
    assert_eq!((cm.tp, cm.fn_, cm.fp, cm.tn), (3, 1, 1, 3));
    assert_eq!(cm.accuracy().value, 0.75);
    assert_eq!(cm.precision().value, 0.75);
    assert_eq!(cm.recall().value, 0.75);
    assert_eq!(cm.f_score().value, 0.75);

    let cm = confusion(&[1, 1, 0, 0, 0], &[1, 0, 0, 0, 0]).unwrap();
    assert_eq!(cm.precision().value, 1.0);
    assert_eq!(cm.recall().value, 0.5);
    assert!((cm.f_score().value - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn degenerate_ratios_are_flagged() {
    let cm = confusion(&[0, 0], &[0, 0]).unwrap();
    assert!(cm.precision().degenerate && cm.recall().degenerate);
    assert_eq!(cm.f_score().value, 0.0);
    assert!(confusion(&[0, 2], &[0, 1]).is_err());
}

#[test]
fn auc_rank_method_equals_pair_enumeration() {
    let mut r = rng(17);
    for case in 0..50 {
        let n = r.random_range(5..80);
        let mut y: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        y[0] = 0;
        y[1] = 1;
        // Coarse scores force plenty of ties.
        let s: Vec<f64> = (0..n).map(|_| (r.random_range(0..12) as f64) / 4.0).collect();
        let roc = roc_auc(&y, &s).unwrap();
        let pairs = auc_by_pairs(&y, &s);
        assert!((roc.auc - pairs).abs() < 1e-12, "case {case}: {} vs {pairs}", roc.auc);
        assert!((trapezoid_area(&roc.points) - pairs).abs() < 1e-12, "case {case}: trapezoid");
    }
}

#[test]
fn auc_edge_cases() {
    assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap().auc, 1.0);
    assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.9, 0.8, 0.2, 0.1]).unwrap().auc, 0.0);
    assert_eq!(roc_auc(&[0, 1, 0, 1], &[0.5; 4]).unwrap().auc, 0.5);
    assert!(roc_auc(&[1, 1], &[0.1, 0.2]).is_err());
    let roc = roc_auc(&[0, 1], &[0.2, 0.7]).unwrap();
    let first = roc.points.first().unwrap();
    let last = roc.points.last().unwrap();
    assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
    assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
}

#[test]
fn auc_is_invariant_to_monotone_rescaling() {
    let y = [0, 1, 1, 0, 1, 0, 0, 1, 1];
    let s = [0.1, 0.4, 0.35, 0.8, 0.7, 0.2, 0.5, 0.9, 0.3];
    let squashed: Vec<f64> = s.iter().map(|v: &f64| (v * 10.0).exp()).collect();
    assert_eq!(roc_auc(&y, &s).unwrap().auc, roc_auc(&y, &squashed).unwrap().auc);
}

#[test]
fn textbook_paired_t_test() {
    // Student's sleep data (Cushny & Peebles): extra hours of sleep under two drugs.
    let a = [0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0];
    let b = [1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4];
    let t = paired_t_test(&a, &b).unwrap();
    assert_eq!(t.df, 9);
    assert!((t.t - -4.0621).abs() < 1e-3, "t = {}", t.t);
    assert!((t.p - 0.002833).abs() < 1e-3, "p = {}", t.p);
    let rev = paired_t_test(&b, &a).unwrap();
    assert_eq!(rev.t, -t.t);
    assert_eq!(rev.p, t.p);
}

#[test]
fn t_test_degenerate_inputs() {
    let same = paired_t_test(&[0.5, 0.6, 0.7], &[0.5, 0.6, 0.7]).unwrap();
    assert_eq!((same.t, same.p), (0.0, 1.0));
    let shifted = paired_t_test(&[0.6, 0.7, 0.8], &[0.5, 0.6, 0.7]).unwrap();
    assert!(shifted.degenerate && shifted.p == 0.0);
    assert!(paired_t_test(&[1.0], &[2.0]).is_err());
    assert!(paired_t_test(&[1.0, 2.0], &[2.0]).is_err());
}

#[test]
fn top_group_flags() {
    let g = top_group(&[
        Some(vec![0.80, 0.82, 0.79, 0.81]),
        Some(vec![0.81, 0.83, 0.80, 0.80]),
        Some(vec![0.50, 0.52, 0.49, 0.51]),
        None,
    ]);
    assert_eq!(g, vec![Significance::TopGroup, Significance::Best, Significance::Other, Significance::Other]);
    assert_eq!(Significance::Best.marker(), "*");
    assert_eq!(Significance::TopGroup.marker(), "+");
}

#[test]
fn cross_entropy_values() {
    assert!((cross_entropy(&[1, 0], &[0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(cross_entropy(&[1], &[0.0]).unwrap().is_finite());
}

#[test]
fn metrics_from_predictions() {
    let preds: Vec<Prediction> = [0.9, 0.2, 0.6, 0.4].iter().map(|&p| Prediction::from_probability(p)).collect();
    let m = Metrics::from_predictions(&[1, 0, 0, 1], &preds).unwrap();
    assert_eq!(m.accuracy, 0.5);
    assert_eq!(m.support, 4);
    assert_eq!(m.auc, Some(0.75));
}

#[test]
fn split_sizes() {
    let s = train_test_split(2455, 0.25, 3).unwrap();
    assert_eq!(s.test.len(), 614);
    assert_eq!(s.train.len() + s.test.len(), 2455);
    assert!(train_test_split(10, 0.0, 1).is_err());
}

#[test]
fn protocol_feasibility() {
    assert!(Protocol::Cv { k: 10, stratified: true }.check_feasible(9).is_err());
    assert!(Protocol::Cv { k: 10, stratified: true }.check_feasible(10).is_ok());
    assert!(Protocol::Split { ratio: 0.25, seeds: vec![] }.check_feasible(100).is_err());
}

proptest! {
    #[test]
    fn folds_partition_rows(labels in prop::collection::vec(0u8..2, 10..200), k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= labels.len());
        let plan = FoldPlan::new(&labels, k, true, seed).unwrap();
        let folds = plan.folds();
        let mut seen = vec![0usize; labels.len()];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            prop_assert_eq!(f.train.len() + f.test.len(), labels.len());
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for class in 0..=1u8 {
            let per: Vec<usize> = folds.iter().map(|f| f.test.iter().filter(|&&i| labels[i] == class).count()).collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
        prop_assert_eq!(&plan, &FoldPlan::new(&labels, k, true, seed).unwrap());
    }

    #[test]
    fn accuracy_is_complement_of_error(y in prop::collection::vec(0u8..2, 1..100), flips in prop::collection::vec(any::<bool>(), 100)) {
        let p: Vec<u8> = y.iter().zip(&flips).map(|(&v, &f)| if f { 1 - v } else { v }).collect();
        let cm = confusion(&y, &p).unwrap();
        prop_assert_eq!(cm.total(), y.len());
        prop_assert!((cm.accuracy().value + cm.error_rate().value - 1.0).abs() < 1e-12);
    }
}
