use shapaudit::dataio::{write_labels_csv, write_view_csv};
use shapaudit::harness::{
    fit_and_attribute, load_dataset, run_experiment, write_outputs, DatasetSource, ExperimentConfig, ExperimentKind,
    ExperimentReport, FAILURE_METRIC,
};
use shapaudit::multiview::FusionScheme;
use shapaudit::Error;

const TINY: &str = r#""dataset":{"source":"synth","view_dims":[10,16],"samples":40,"classes":2,
  "informative":[3,3],"effect_size":1.5,"seed":2},
 "plan":{"views":[{"hidden1":6,"hidden2":6,"embedding":4},{"hidden1":6,"hidden2":6,"embedding":4}],"fusion_hidden":4},
 "train":{"max_iterations":40,"patience":5},"forest":{"trees":30},"width_floor":2"#;

fn cfg(head: &str) -> ExperimentConfig {
    let cfg: ExperimentConfig = serde_json::from_str(&format!("{{{head},{TINY}}}")).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn rows<'a>(report: &'a ExperimentReport, metric: &'a str) -> impl Iterator<Item = &'a shapaudit::harness::ReportRow> {
    report.rows.iter().filter(move |r| r.metric == metric)
}

#[test]
fn single_run_at_zero_noise_is_its_own_reference() {
    let report = run_experiment(&cfg(r#""kind":"compression","runs":1"#), None).unwrap();
    let taus: Vec<f64> = rows(&report, "tau_w_reference").map(|r| r.value).collect();
    assert_eq!(taus, vec![1.0]);
    assert_eq!(rows(&report, "tau_w_cross_seed").count(), 0);
}

#[test]
fn compression_row_arithmetic() {
    let report = run_experiment(
        &cfg(r#""kind":"compression","runs":10,"noise_levels":[0,5,10,20,40,80],"sizing":["static","dynamic"]"#),
        None,
    )
    .unwrap();
    assert_eq!(report.failures(), 0);
    assert_eq!(rows(&report, "tau_w_reference").count(), 120);
    assert_eq!(rows(&report, "tau_w_cross_seed").count(), 120);
    let first = rows(&report, "tau_w_reference").next().unwrap();
    assert_eq!(first.condition, "fusion=concat/sizing=static/noise=0");
    // Seeds depend on the run only, so every condition reuses the same ten.
    let seeds: Vec<u64> = rows(&report, "tau_w_reference").take(10).map(|r| r.seed.unwrap()).collect();
    for chunk in rows(&report, "tau_w_reference").collect::<Vec<_>>().chunks(10) {
        assert_eq!(chunk.iter().map(|r| r.seed.unwrap()).collect::<Vec<_>>(), seeds);
    }
}

#[test]
fn single_stability_run_is_degenerate() {
    let report = run_experiment(&cfg(r#""kind":"stability","runs":1"#), None).unwrap();
    let key = "fusion=concat/sizing=static/noise=0";
    let stat = |metric: &str| -> Vec<f64> {
        report
            .summary
            .iter()
            .filter(|r| r.condition == key && r.metric == metric)
            .map(|r| r.value)
            .collect()
    };
    assert_eq!(stat("rank_pooled_min"), stat("rank_pooled_max"));
    assert!(stat("rank_pooled_spread").iter().all(|&s| s == 0.0));
    let top: Vec<(String, f64)> = report
        .summary
        .iter()
        .filter(|r| r.metric == "top_pooled")
        .map(|r| (r.item.clone(), r.value))
        .collect();
    assert_eq!(top.len(), 8);
    for (name, pos) in &top {
        let rank = report
            .summary
            .iter()
            .find(|r| r.metric == "rank_pooled_median" && &r.item == name)
            .unwrap()
            .value;
        assert_eq!(rank, *pos);
    }
}

#[test]
fn same_seed_same_ranking() {
    let c = cfg(r#""kind":"stability","runs":2"#);
    let (ds, _) = load_dataset(&c).unwrap();
    let plan = c.plan.to_plan(&ds.input_dims(), FusionScheme::Concat, 2).unwrap();
    let a = fit_and_attribute(&c, &ds, &plan, 17).unwrap();
    let b = fit_and_attribute(&c, &ds, &plan, 17).unwrap();
    assert_eq!(a.real_pooled().unwrap(), b.real_pooled().unwrap());
    assert_eq!(a.model, b.model);
}

#[test]
fn full_subset_equals_all_features() {
    let report = run_experiment(&cfg(r#""kind":"subset","runs":2,"percents":[100,50]"#), None).unwrap();
    assert_eq!(report.failures(), 0);
    let all: Vec<f64> = rows(&report, "rf_auc_all").map(|r| r.value).collect();
    let full: Vec<f64> = rows(&report, "rf_auc_subset").filter(|r| r.item == "p=100").map(|r| r.value).collect();
    assert_eq!(all.len(), 2);
    assert_eq!(all, full);
    let v_all: Vec<f64> = rows(&report, "v_measure_all_test").map(|r| r.value).collect();
    let v_full: Vec<f64> = rows(&report, "v_measure_subset_test").filter(|r| r.item == "p=100").map(|r| r.value).collect();
    assert_eq!(v_all, v_full);
}

#[test]
fn failing_condition_is_isolated() {
    // A floor of 5 cannot be honoured by 4 + 4 embedding units once the
    // dynamic scheme has to re-split them; the static scheme is unaffected.
    let mut c = cfg(r#""kind":"compression","runs":2,"noise_levels":[0,10],"sizing":["static","dynamic"]"#);
    c.width_floor = 5;
    let report = run_experiment(&c, None).unwrap();
    let failed: Vec<&str> = report
        .rows
        .iter()
        .filter(|r| r.metric == FAILURE_METRIC)
        .map(|r| r.condition.as_str())
        .collect();
    assert_eq!(failed, vec!["fusion=concat/sizing=dynamic/noise=10"; 2]);
    assert!(report.rows.iter().filter(|r| r.is_failure()).all(|r| r.value.is_nan() && !r.item.is_empty()));
    for cond in [
        "fusion=concat/sizing=static/noise=0",
        "fusion=concat/sizing=static/noise=10",
        "fusion=concat/sizing=dynamic/noise=0",
    ] {
        assert_eq!(report.values(cond, "tau_w_reference").len(), 2, "{cond}");
    }
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&report, &c, dir.path()).unwrap();
    let back = ExperimentReport::load_json(&dir.path().join("report.json")).unwrap();
    assert_eq!(back.failures(), 2);
}

#[test]
fn csv_source_matches_synthetic_source() {
    let synth = cfg(r#""kind":"stability","runs":2"#);
    let (ds, _) = load_dataset(&synth).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for v in &ds.views {
        write_view_csv(v, &dir.path().join(format!("{}.csv", v.view_id))).unwrap();
    }
    write_labels_csv(&ds, &dir.path().join("labels.csv")).unwrap();
    let toml = format!(
        r#"kind = "stability"
runs = 2
[dataset]
source = "csv"
labels = "labels.csv"
views = [{{ id = "{a}", path = "{a}.csv" }}, {{ id = "{b}", path = "{b}.csv" }}]
[plan]
fusion_hidden = 4
views = [{{ hidden1 = 6, hidden2 = 6, embedding = 4 }}, {{ hidden1 = 6, hidden2 = 6, embedding = 4 }}]
"#,
        a = ds.views[0].view_id,
        b = ds.views[1].view_id
    );
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, toml).unwrap();
    let c = ExperimentConfig::load(&path).unwrap();
    assert_eq!(c.kind, ExperimentKind::Stability);
    let DatasetSource::Csv { views, .. } = &c.dataset else { panic!("expected csv source") };
    assert!(views[0].path.starts_with(dir.path()));
    let (loaded, truth) = load_dataset(&c).unwrap();
    assert!(truth.is_none());
    assert_eq!(loaded.views, ds.views);
    assert_eq!(loaded.labels, ds.labels);
}

#[test]
fn bad_configs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("levels.json", format!(r#"{{"kind":"compression","noise_levels":[5,10],{TINY}}}"#)),
        ("order.json", format!(r#"{{"kind":"stability","noise_levels":[10,5],{TINY}}}"#)),
        ("runs.json", format!(r#"{{"kind":"subset","runs":0,{TINY}}}"#)),
        ("syntax.json", "{ not json".to_string()),
        ("kind.json", format!(r#"{{"kind":"other",{TINY}}}"#)),
    ];
    for (name, text) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        assert!(matches!(ExperimentConfig::load(&path), Err(Error::Config(_))), "{name}");
    }
    assert!(matches!(ExperimentConfig::load(&dir.path().join("missing.json")), Err(Error::Config(_))));
}

#[test]
fn config_hash_ignores_formatting() {
    let a = cfg(r#""kind":"subset","runs":2"#);
    let b: ExperimentConfig = serde_json::from_str(&serde_json::to_string_pretty(&a).unwrap()).unwrap();
    assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    let mut c = a.clone();
    c.master_seed += 1;
    assert_ne!(a.hash().unwrap(), c.hash().unwrap());
}
