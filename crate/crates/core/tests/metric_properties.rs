use magnet::pipeline::{metrics_from_scores, tune_threshold, CloneType, ClonePair, Metrics};
use proptest::prelude::*;

fn pairs(labels: &[(bool, usize)]) -> Vec<ClonePair> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &(label, ty))| ClonePair {
            id1: format!("a{i}"),
            id2: format!("b{i}"),
            label,
            clone_type: label.then(|| CloneType::ALL[ty % CloneType::ALL.len()]),
        })
        .collect()
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<(bool, usize)>)> {
    (1usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![(-4i32..=4).prop_map(|k| k as f64 / 4.0), -1.0..1.0f64], n),
            prop::collection::vec((any::<bool>(), 0usize..6), n),
        )
    })
}

fn f1_of(m: &Metrics) -> f64 {
    let den = 2 * m.tp + m.fp + m.fn_;
    if den == 0 {
        0.0
    } else {
        2.0 * m.tp as f64 / den as f64
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn confusion_counts_and_f1_identity((scores, labels) in scored(), sigma in -1.1..1.1f64) {
        let m = metrics_from_scores(&scores, &pairs(&labels), sigma);
        prop_assert_eq!(m.tp + m.fp + m.tn + m.fn_, scores.len());
        prop_assert_eq!(m.tp + m.fn_, labels.iter().filter(|l| l.0).count());
        prop_assert_eq!(m.tp + m.fp, scores.iter().filter(|&&s| s > sigma).count());
        let harmonic = if m.precision + m.recall > 0.0 {
            2.0 * m.precision * m.recall / (m.precision + m.recall)
        } else {
            0.0
        };
        prop_assert!((m.f1 - harmonic).abs() < 1e-12);
        prop_assert!((m.f1 - f1_of(&m)).abs() < 1e-12);
    }

    #[test]
    fn overall_recall_lies_between_type_recalls((scores, labels) in scored(), sigma in -1.1..1.1f64) {
        let m = metrics_from_scores(&scores, &pairs(&labels), sigma);
        let typed: usize = m.per_type.values().map(|t| t.count).sum();
        prop_assert_eq!(typed, m.tp + m.fn_);
        if let (Some(lo), Some(hi)) = (
            m.per_type.values().map(|t| t.recall).min_by(f64::total_cmp),
            m.per_type.values().map(|t| t.recall).max_by(f64::total_cmp),
        ) {
            prop_assert!(lo - 1e-12 <= m.recall && m.recall <= hi + 1e-12);
        }
    }

    #[test]
    fn raising_the_threshold_never_adds_predictions(
        (scores, labels) in scored(),
        lo in -1.1..1.1f64,
        step in 0.0..1.0f64,
    ) {
        let p = pairs(&labels);
        let a = metrics_from_scores(&scores, &p, lo);
        let b = metrics_from_scores(&scores, &p, lo + step);
        prop_assert!(b.recall <= a.recall);
        prop_assert!(b.tp + b.fp <= a.tp + a.fp);
    }

    #[test]
    fn tuned_threshold_is_the_best_midpoint((scores, labels) in scored()) {
        let flags: Vec<bool> = labels.iter().map(|l| l.0).collect();
        prop_assume!(flags.iter().any(|&l| l) && !flags.iter().all(|&l| l));
        let sigma = tune_threshold(&scores, &flags).unwrap();
        let p = pairs(&labels);
        let best = f1_of(&metrics_from_scores(&scores, &p, sigma));

        let mut distinct = scores.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let candidates: Vec<f64> = if distinct.len() == 1 {
            distinct.clone()
        } else {
            distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
        };
        prop_assert!(candidates.contains(&sigma));
        for &c in &candidates {
            let f = f1_of(&metrics_from_scores(&scores, &p, c));
            prop_assert!(f <= best, "{c} gives {f} > {best} at {sigma}");
            if c > sigma {
                prop_assert!(f < best, "tie at larger {c} not preferred over {sigma}");
            }
        }
    }
}

#[test]
fn tuning_examples() {
    assert_eq!(tune_threshold(&[0.2, 0.4, 0.8], &[false, true, true]).unwrap(), 0.30000000000000004);
    let sigma = tune_threshold(&[-0.5, -0.4, 0.6, 0.9], &[false, false, true, true]).unwrap();
    assert!((sigma - 0.1).abs() < 1e-12);
}
