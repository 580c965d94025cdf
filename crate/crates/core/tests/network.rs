mod common;

use shapaudit::dataio::{synth_multiview, MultiViewDataset, Split, SplitFractions, SynthConfig};
use shapaudit::downstream::auc_score;
use shapaudit::multiview::{train, FusionScheme, LayerPlan, Mode, PresenceMask, TrainConfig, TrainedModel, ViewLayers};
use shapaudit::nncore::{AdamConfig, Rng};

fn dataset(effect: f64, seed: u64) -> MultiViewDataset {
    synth_multiview(&SynthConfig {
        view_dims: vec![10, 14],
        view_names: Vec::new(),
        samples: 90,
        classes: 2,
        informative: vec![4, 4],
        effect_size: effect,
        seed,
        fractions: SplitFractions::default(),
    })
    .unwrap()
    .0
}

fn plan(fusion: FusionScheme) -> LayerPlan {
    LayerPlan {
        views: vec![ViewLayers::new(10, 8, 8, 4), ViewLayers::new(14, 8, 8, 4)],
        fusion,
        fusion_hidden: 6,
        classes: 2,
    }
}

fn quick(seed: u64) -> TrainConfig {
    TrainConfig {
        max_iterations: 300,
        patience: 30,
        seed,
        adam: AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic() {
    let ds = dataset(1.0, 1);
    for fusion in [FusionScheme::Mean, FusionScheme::Concat] {
        let a = train(&plan(fusion), &ds, &quick(5)).unwrap();
        let b = train(&plan(fusion), &ds, &quick(5)).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = train(&plan(fusion), &ds, &quick(6)).unwrap();
        assert_ne!(a.network.params, c.network.params);
    }
}

#[test]
fn separable_data_is_learned() {
    let ds = dataset(3.0, 2);
    let model = train(&plan(FusionScheme::Concat), &ds, &quick(1)).unwrap();
    let test = ds.indices(&[Split::Test]);
    let probs = model
        .predict_proba(&ds.view_inputs(&test), &ds.mask.select_rows(&test))
        .unwrap();
    let auc = auc_score(&ds.labels_at(&test), &probs).unwrap();
    assert!(auc >= 0.95, "test AUC {auc}");
}

#[test]
fn frozen_optimizer_plateaus_after_patience() {
    let ds = dataset(1.0, 3);
    let cfg = TrainConfig {
        adam: AdamConfig {
            lr: 1e-300,
            ..AdamConfig::default()
        },
        dropout: 0.0,
        ..quick(2)
    };
    let model = train(&plan(FusionScheme::Mean), &ds, &cfg).unwrap();
    assert_eq!(model.stopping_iteration, cfg.patience + 1);
    assert_eq!(model.final_iterations, (6 * (cfg.patience + 1)).div_ceil(5));
}

#[test]
fn model_json_round_trip() {
    let ds = dataset(1.0, 4);
    let model = train(&plan(FusionScheme::Concat), &ds, &quick(9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let back = TrainedModel::load(&path).unwrap();
    assert_eq!(back, model);
    let idx: Vec<usize> = (0..ds.n_samples()).collect();
    let inputs = ds.view_inputs(&idx);
    let p1 = model.predict_proba(&inputs, &ds.mask).unwrap();
    let p2 = back.predict_proba(&inputs, &ds.mask).unwrap();
    assert_eq!(p1, p2);
}

#[test]
fn eval_mode_is_pure() {
    let mut rng = Rng::new(3, 0);
    let plan = common::random_plan(&mut rng, FusionScheme::Concat, 12);
    let model = TrainedModel::from_network(common::random_network(&plan, 7), 0.5, 7);
    let inputs = common::random_inputs(&mut rng, &plan, 5);
    let mask = PresenceMask::all_present(5, plan.num_views());
    let a = model.forward(&inputs, &mask, Mode::Eval, None).unwrap();
    let mut unused = Rng::new(1, 1);
    let b = model.forward(&inputs, &mask, Mode::Eval, Some(&mut unused)).unwrap();
    assert_eq!(a.logits, b.logits);
    assert_eq!(unused.next_u64(), Rng::new(1, 1).next_u64());
}

#[test]
fn gradients_with_missing_views() {
    let mut rng = Rng::new(11, 0);
    let plan = common::random_plan(&mut rng, FusionScheme::Mean, 10);
    let net = common::random_network(&plan, 3);
    let n = 7;
    let mut inputs = common::random_inputs(&mut rng, &plan, n);
    let present: Vec<Vec<bool>> = (0..n).map(|s| (0..plan.num_views()).map(|v| v == 0 || s % 3 != 0).collect()).collect();
    for (s, row) in present.iter().enumerate() {
        for (v, &p) in row.iter().enumerate() {
            if !p {
                inputs[v].row_mut(s).fill(0.0);
            }
        }
    }
    let mask = PresenceMask::new(present).unwrap();
    let labels: Vec<usize> = (0..n).map(|s| s % plan.classes).collect();
    let r = common::check_network_gradient(&net, &inputs, &mask, &labels, 1e-5);
    assert!(r.checked > 0);
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn train_mode_without_dropout_matches_eval() {
    let mut rng = Rng::new(4, 0);
    let plan = common::random_plan(&mut rng, FusionScheme::Mean, 12);
    let model = TrainedModel::from_network(common::random_network(&plan, 4), 0.0, 4);
    let inputs = common::random_inputs(&mut rng, &plan, 6);
    let mask = PresenceMask::all_present(6, plan.num_views());
    let eval = model.forward(&inputs, &mask, Mode::Eval, None).unwrap();
    let train = model.forward(&inputs, &mask, Mode::Train, None).unwrap();
    assert_eq!(eval.logits, train.logits);
}

#[test]
fn hand_traced_single_view_net() {
    use shapaudit::nncore::Matrix;
    let plan = LayerPlan {
        views: vec![ViewLayers::new(1, 1, 1, 1)],
        fusion: FusionScheme::Mean,
        fusion_hidden: 1,
        classes: 2,
    };
    let mut net = shapaudit::multiview::Network::new(plan, 0).unwrap();
    let set = |d: &mut shapaudit::multiview::Dense, w: &[f64], b: &[f64]| {
        d.weight = Matrix::from_vec(1, w.len(), w.to_vec()).unwrap();
        d.bias = Matrix::row_vector(b);
    };
    let v = &mut net.params.views[0];
    set(&mut v.hidden1, &[2.0], &[-0.5]);
    set(&mut v.hidden2, &[-1.0], &[1.0]);
    set(&mut v.embedding, &[3.0], &[0.25]);
    set(&mut net.params.fusion_hidden, &[4.0], &[0.0]);
    set(&mut net.params.output, &[1.0, -2.0], &[0.5, 0.0]);
    // z1 = 1.5, z2 = -0.5 -> 0, embedding 0.25, fused hidden 1.0.
    let t = net
        .forward(&[Matrix::row_vector(&[1.0])], &PresenceMask::all_present(1, 1), Mode::Eval, 0.0, None)
        .unwrap();
    assert_eq!(t.logits.data(), &[1.5, -2.0]);
}
