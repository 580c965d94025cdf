mod common;

use proptest::prelude::*;
use shapaudit::attribution::rank_features;
use shapaudit::dataio::{synth_multiview, Split, SplitFractions, SynthConfig};
use shapaudit::downstream::{
    auc_binary, auc_score, rf_fit_predict, subset_top_p, v_measure, ward_cluster, ForestConfig,
};
use shapaudit::nncore::{Matrix, Rng};

proptest! {
    #[test]
    fn auc_matches_pair_enumeration(
        data in prop::collection::vec((any::<bool>(), 0u8..20), 2..500)
    ) {
        let labels: Vec<bool> = data.iter().map(|d| d.0).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let scores: Vec<f64> = data.iter().map(|d| f64::from(d.1) / 7.0).collect();
        let fast = auc_binary(&labels, &scores).unwrap();
        prop_assert!((fast - common::brute_auc(&labels, &scores)).abs() < 1e-12);
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        prop_assert!((auc_binary(&flipped, &scores).unwrap() - (1.0 - fast)).abs() < 1e-12);
    }

    #[test]
    fn v_measure_symmetric_and_label_free(
        pairs in prop::collection::vec((0usize..4, 0usize..5), 1..80),
        shift in 1usize..7
    ) {
        let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let q = v_measure(&truth, &pred).unwrap();
        let swapped = v_measure(&pred, &truth).unwrap();
        prop_assert!((q.v_measure - swapped.v_measure).abs() < 1e-12);
        prop_assert!((q.homogeneity - swapped.completeness).abs() < 1e-12);
        let relabeled: Vec<usize> = pred.iter().map(|p| (p + shift) % 5 + 10).collect();
        let r = v_measure(&truth, &relabeled).unwrap();
        prop_assert!((q.v_measure - r.v_measure).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&q.v_measure));
    }

    #[test]
    fn subsets_are_nested(scores in prop::collection::vec(0.0f64..1.0, 1..200), p in 1.0f64..100.0) {
        let names = (0..scores.len()).map(|i| format!("f{i}")).collect();
        let r = rank_features(&scores, names).unwrap();
        let small = subset_top_p(&r, p).unwrap();
        let large = subset_top_p(&r, (p + 10.0).min(100.0)).unwrap();
        prop_assert!(small.len() <= large.len());
        prop_assert_eq!(&large[..small.len()], &small[..]);
        let worst_kept = small.iter().map(|&i| scores[i]).fold(f64::INFINITY, f64::min);
        prop_assert!(large[small.len()..].iter().all(|&i| scores[i] <= worst_kept));
    }
}

#[test]
fn full_subset_is_rank_order() {
    let r = rank_features(&[0.2, 0.9, 0.5], vec!["a".into(), "b".into(), "c".into()]).unwrap();
    assert_eq!(subset_top_p(&r, 100.0).unwrap(), vec![1, 2, 0]);
}

fn planted(effect: f64, seed: u64) -> (shapaudit::dataio::MultiViewDataset, Vec<usize>) {
    let (ds, truth) = synth_multiview(&SynthConfig {
        view_dims: vec![30, 60],
        view_names: Vec::new(),
        samples: 120,
        classes: 2,
        informative: vec![5, 5],
        effect_size: effect,
        seed,
        fractions: SplitFractions::default(),
    })
    .unwrap();
    let cols = truth.informative[0]
        .iter()
        .copied()
        .chain(truth.informative[1].iter().map(|f| f + 30))
        .collect();
    (ds, cols)
}

fn holdout_auc(ds: &shapaudit::dataio::MultiViewDataset, cols: &[usize], labels: &[usize], seed: u64) -> f64 {
    let train = ds.indices(&[Split::Train, Split::Val]);
    let test = ds.indices(&[Split::Test]);
    let x = ds.pooled_matrix(&(0..ds.n_samples()).collect::<Vec<_>>()).unwrap().select_columns(cols);
    let cfg = ForestConfig {
        trees: 200,
        seed,
        ..ForestConfig::default()
    };
    let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let p = rf_fit_predict(&x.select_rows(&train), &y_train, 2, &x.select_rows(&test), &cfg).unwrap();
    auc_score(&y_test, &p).unwrap()
}

#[test]
fn informative_features_predict_holdout() {
    let (ds, cols) = planted(2.0, 5);
    let auc = holdout_auc(&ds, &cols, &ds.labels, 1);
    assert!(auc >= 0.9, "AUC {auc}");
}

#[test]
fn permuted_labels_give_chance_auc() {
    let (ds, cols) = planted(2.0, 6);
    let mut labels = ds.labels.clone();
    Rng::new(99, 0).shuffle(&mut labels);
    let auc = holdout_auc(&ds, &cols, &labels, 2);
    assert!((0.25..=0.75).contains(&auc), "AUC {auc}");
}

#[test]
fn forest_is_deterministic_per_seed() {
    let (ds, cols) = planted(1.0, 7);
    let a = holdout_auc(&ds, &cols, &ds.labels, 3);
    let b = holdout_auc(&ds, &cols, &ds.labels, 3);
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn ward_recovers_blobs() {
    let mut rng = Rng::new(1, 0);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let c = if i % 2 == 0 { 0.0 } else { 10.0 };
            vec![c + rng.standard_normal(), c + rng.standard_normal()]
        })
        .collect();
    let labels = ward_cluster(&Matrix::from_rows(&rows).unwrap(), 2).unwrap();
    let truth: Vec<usize> = (0..40).map(|i| i % 2).collect();
    assert_eq!(v_measure(&truth, &labels).unwrap().v_measure, 1.0);
}
