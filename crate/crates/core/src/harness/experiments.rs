use log::{info, warn};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{DatasetSource, ExperimentConfig, ExperimentKind};
use super::report::{ExperimentReport, Provenance, ReportRow, Timestamps};
use crate::attribution::{aggregate_scores, deepshap_attribute, rank_features, AttributionResult, BackgroundSet, RankVector, Universe};
use crate::dataio::{
    load_labels_csv, load_view_csv, stratified_split, synth_multiview, zscore_standardize, GroundTruth, LoadOptions,
    MultiViewDataset, Split,
};
use crate::downstream::{auc_score, rf_fit_predict, subset_top_p, v_measure, ward_cluster, ForestConfig};
use crate::error::{Error, Result};
use crate::multiview::{train, FusionScheme, LayerPlan, TrainedModel};
use crate::nncore::{streams, Matrix, Rng};
use crate::perturb::{gen_noise_features, is_noise_feature, NoiseSpec, SizingKind, SizingScheme};
use crate::rankstats::{rank_distribution, weighted_kendall_tau};

/// Run seed as a pure function of (master seed, key, run index): the first
/// eight bytes, little-endian, of SHA-256 over their concatenation.
pub fn derive_seed(master: u64, key: &str, run: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(key.as_bytes());
    h.update([0u8]);
    h.update((run as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Raw (unstandardized) dataset with splits assigned.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<(MultiViewDataset, Option<GroundTruth>)> {
    match &cfg.dataset {
        DatasetSource::Synth(s) => {
            let (ds, truth) = synth_multiview(s)?;
            Ok((ds, Some(truth)))
        }
        DatasetSource::Csv {
            views,
            labels,
            allow_missing_views,
            impute_median,
            split_seed,
            fractions,
        } => {
            let opts = LoadOptions {
                impute_median: *impute_median,
            };
            let loaded = views
                .iter()
                .map(|v| load_view_csv(&v.path, &v.id, opts))
                .collect::<Result<Vec<_>>>()?;
            let table = load_labels_csv(labels)?;
            let ds = MultiViewDataset::assemble(loaded, table, *allow_missing_views)?;
            let rng = Rng::new(split_seed.unwrap_or(cfg.master_seed), streams::SPLIT);
            let splits = stratified_split(&ds.labels, *fractions, &rng)?;
            Ok((ds.with_splits(splits)?, None))
        }
    }
}

/// Appends `level` noise features to `view` (generated from the raw data),
/// then z-scores with train statistics when requested.
pub fn prepare_level(
    raw: &MultiViewDataset,
    view: usize,
    level: usize,
    noise_seed: u64,
    standardize: bool,
) -> Result<MultiViewDataset> {
    let mut ds = raw.clone();
    if level > 0 {
        let spec = NoiseSpec {
            view,
            n_noise: level,
            seed: noise_seed,
            stream: streams::NOISE,
        };
        ds.views[view] = gen_noise_features(&raw.views[view], &spec)?;
    }
    if standardize {
        ds = zscore_standardize(&ds)?.0;
    }
    Ok(ds)
}

/// Layer plan for `ds` (which may already carry noise features) under the
/// given fusion and sizing scheme.
pub fn plan_for(
    cfg: &ExperimentConfig,
    ds: &MultiViewDataset,
    fusion: FusionScheme,
    sizing: SizingKind,
) -> Result<LayerPlan> {
    let base_dims: Vec<usize> = ds
        .views
        .iter()
        .map(|v| v.feature_names.iter().filter(|n| !is_noise_feature(n)).count())
        .collect();
    let base = cfg.plan.to_plan(&base_dims, fusion, ds.n_classes())?;
    let scheme = SizingScheme {
        kind: sizing,
        base,
        floor: cfg.width_floor,
        rule: cfg.dynamic_rule,
    };
    let plan = scheme.plan_for(&ds.input_dims())?;
    if plan.fusion != fusion {
        return Err(Error::Config(format!(
            "sizing '{}' is incompatible with {} fusion",
            sizing.name(),
            fusion.name()
        )));
    }
    Ok(plan)
}

/// Aborts on scheme/fusion incompatibilities; any other sizing error is left
/// to fail that condition's runs.
fn check_plans<'a>(
    cfg: &ExperimentConfig,
    conds: &[Condition],
    dataset: impl Fn(&Condition) -> &'a MultiViewDataset,
) -> Result<()> {
    for c in conds {
        match plan_for(cfg, dataset(c), c.fusion, c.sizing) {
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => warn!("{}: {e}", c.key),
            Ok(_) => {}
        }
    }
    Ok(())
}

/// A trained model with its attributions on the final training data.
pub struct FittedRun {
    pub model: TrainedModel,
    pub attribution: AttributionResult,
    pub test_auc: Option<f64>,
}

impl FittedRun {
    /// Pooled scores and names restricted to non-noise features.
    pub fn real_pooled(&self) -> Result<(Vec<f64>, Vec<String>)> {
        self.filtered(Universe::Pooled, |n| !is_noise_feature(n))
    }

    pub fn filtered(&self, universe: Universe, keep: impl Fn(&str) -> bool) -> Result<(Vec<f64>, Vec<String>)> {
        let scores = aggregate_scores(&self.attribution, universe)?;
        let names = self.attribution.universe_names(universe)?;
        Ok(scores.into_iter().zip(names).filter(|(_, n)| keep(n)).unzip())
    }
}

/// Trains with `seed`, attributes the train + validation rows against the
/// train-split background, and scores the test split when present.
pub fn fit_and_attribute(
    cfg: &ExperimentConfig,
    ds: &MultiViewDataset,
    plan: &LayerPlan,
    seed: u64,
) -> Result<FittedRun> {
    let mut tc = cfg.train.clone();
    tc.seed = seed;
    let model = train(plan, ds, &tc)?;
    attribute_model(cfg, ds, model, seed)
}

/// Attribution and test scoring for an already trained model.
pub fn attribute_model(cfg: &ExperimentConfig, ds: &MultiViewDataset, model: TrainedModel, seed: u64) -> Result<FittedRun> {
    let final_idx = ds.indices(&[Split::Train, Split::Val]);
    let train_idx = ds.indices(&[Split::Train]);
    let bg_views = ds.view_inputs(&train_idx);
    let background = match cfg.background {
        Some(k) if k < train_idx.len() => {
            BackgroundSet::subsample(&bg_views, k, &mut Rng::new(seed, streams::BACKGROUND))?
        }
        _ => BackgroundSet::new(bg_views)?,
    };
    let names = ds.views.iter().map(|v| v.feature_names.clone()).collect();
    let attribution = deepshap_attribute(&model, &ds.view_inputs(&final_idx), &background)?.with_feature_names(names)?;
    let test_idx = ds.indices(&[Split::Test]);
    let test_auc = if test_idx.is_empty() {
        None
    } else {
        let probs = model.predict_proba(&ds.view_inputs(&test_idx), &ds.mask.select_rows(&test_idx))?;
        auc_score(&ds.labels_at(&test_idx), &probs).ok()
    };
    Ok(FittedRun {
        model,
        attribution,
        test_auc,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn summarize(report: &mut ExperimentReport, condition: &str, metric: &str) {
    let mut v = report.values(condition, metric);
    if v.is_empty() {
        return;
    }
    let m = mean(&v);
    report.summary.push(ReportRow::summary(condition, &format!("{metric}_mean"), "", m));
    let med = median(&mut v);
    report.summary.push(ReportRow::summary(condition, &format!("{metric}_median"), "", med));
}

/// A report with provenance filled in and no rows.
pub fn new_report(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(ExperimentReport {
        provenance: Provenance {
            experiment: cfg.kind.name().to_string(),
            config_hash: cfg.hash()?,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: cfg.master_seed,
        },
        rows: Vec::new(),
        summary: Vec::new(),
        timestamps: None,
    })
}

struct Condition {
    key: String,
    fusion: FusionScheme,
    sizing: SizingKind,
    level: usize,
}

fn conditions(cfg: &ExperimentConfig, levels: &[usize]) -> Vec<Condition> {
    let mut out = Vec::new();
    for &fusion in &cfg.fusion {
        for &sizing in &cfg.sizing {
            if sizing == SizingKind::ProportionalConcat && fusion == FusionScheme::Mean {
                warn!("skipping proportional-concat sizing under mean fusion");
                continue;
            }
            for &level in levels {
                out.push(Condition {
                    key: format!("fusion={}/sizing={}/noise={level}", fusion.name(), sizing.name()),
                    fusion,
                    sizing,
                    level,
                });
            }
        }
    }
    out
}

/// Prepared datasets, one per noise level, sharing one noise draw.
fn level_datasets(cfg: &ExperimentConfig, raw: &MultiViewDataset, levels: &[usize]) -> Result<Vec<MultiViewDataset>> {
    let noise_seed = derive_seed(cfg.master_seed, "noise", 0);
    levels
        .iter()
        .map(|&l| prepare_level(raw, cfg.noise_view, l, noise_seed, cfg.standardize))
        .collect()
}

/// Runs every (condition, run) job in parallel and returns results in
/// (condition, run) order.
fn run_jobs<T: Send>(
    n_conditions: usize,
    runs: usize,
    job: impl Fn(usize, usize) -> Result<T> + Sync,
) -> Vec<Result<T>> {
    (0..n_conditions * runs)
        .into_par_iter()
        .map(|j| {
            let (c, r) = (j / runs, j % runs);
            let out = job(c, r);
            match &out {
                Ok(_) => info!("condition {c} run {r} finished"),
                Err(e) => warn!("condition {c} run {r} failed: {e}"),
            }
            out
        })
        .collect()
}

struct CompressionRun {
    scores: Vec<f64>,
    abs_original: f64,
    abs_noise: Option<f64>,
    test_auc: Option<f64>,
}

fn tau_row(cond: &str, run: usize, seed: u64, metric: &str, a: &[f64], b: Option<&CompressionRun>) -> ReportRow {
    match b.map(|b| weighted_kendall_tau(a, &b.scores)) {
        Some(Ok(t)) => ReportRow::new(cond, run, seed, metric, t.tau_w),
        Some(Err(e)) => ReportRow::new(cond, run, seed, metric, f64::NAN).with_item(e.to_string()),
        None => ReportRow::new(cond, run, seed, metric, f64::NAN).with_item("comparison run failed"),
    }
}

/// Noise-feature compression: original-feature rankings under added noise
/// compared with the zero-noise run of the same seed, plus run-to-run
/// agreement within each condition.
pub fn run_compression(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (raw, _) = load_dataset(cfg)?;
    if raw.views.len() != 2 {
        return Err(Error::Config("compression needs a two-view dataset".into()));
    }
    let levels = cfg.noise_levels.clone();
    let datasets = level_datasets(cfg, &raw, &levels)?;
    let conds = conditions(cfg, &levels);
    check_plans(cfg, &conds, |c| &datasets[levels.iter().position(|&l| l == c.level).expect("level")])?;
    let seeds: Vec<u64> = (0..cfg.runs).map(|i| derive_seed(cfg.master_seed, "compression", i)).collect();

    let results = run_jobs(conds.len(), cfg.runs, |c, r| {
        let li = levels.iter().position(|&l| l == conds[c].level).expect("level");
        let plan = plan_for(cfg, &datasets[li], conds[c].fusion, conds[c].sizing)?;
        let fit = fit_and_attribute(cfg, &datasets[li], &plan, seeds[r])?;
        let (scores, _) = fit.real_pooled()?;
        let (noise, _) = fit.filtered(Universe::Pooled, is_noise_feature)?;
        Ok(CompressionRun {
            abs_original: mean(&scores),
            abs_noise: (!noise.is_empty()).then(|| mean(&noise)),
            scores,
            test_auc: fit.test_auc,
        })
    });

    let mut report = new_report(cfg)?;
    let runs = cfg.runs;
    for (c, cond) in conds.iter().enumerate() {
        let reference = conds
            .iter()
            .position(|o| o.fusion == cond.fusion && o.sizing == cond.sizing && o.level == 0)
            .expect("level 0 present");
        for r in 0..runs {
            let seed = seeds[r];
            let res = match &results[c * runs + r] {
                Ok(res) => res,
                Err(e) => {
                    report.rows.push(ReportRow::failure(&cond.key, r, seed, &e.to_string()));
                    continue;
                }
            };
            let k = &cond.key;
            let refr = results[reference * runs + r].as_ref().ok();
            report.rows.push(tau_row(k, r, seed, "tau_w_reference", &res.scores, refr));
            if runs > 1 {
                let other = results[c * runs + (r + 1) % runs].as_ref().ok();
                report.rows.push(tau_row(k, r, seed, "tau_w_cross_seed", &res.scores, other));
            }
            report.rows.push(ReportRow::new(k, r, seed, "mean_abs_phi_original", res.abs_original));
            if let Some(v) = res.abs_noise {
                report.rows.push(ReportRow::new(k, r, seed, "mean_abs_phi_noise", v));
            }
            if let Some(v) = res.test_auc {
                report.rows.push(ReportRow::new(k, r, seed, "nn_test_auc", v));
            }
        }
    }
    for cond in &conds {
        for m in ["tau_w_reference", "tau_w_cross_seed", "mean_abs_phi_original", "mean_abs_phi_noise", "nn_test_auc"] {
            summarize(&mut report, &cond.key, m);
        }
    }
    Ok(report)
}

struct StabilityRun {
    pooled: RankVector,
    single: RankVector,
    test_auc: Option<f64>,
}

fn emit_distribution(report: &mut ExperimentReport, key: &str, tag: &str, runs: &[RankVector], top_k: usize) -> Result<()> {
    let dist = rank_distribution(runs)?;
    for (f, s) in dist.features.iter().zip(&dist.summaries) {
        for (stat, v) in [
            ("min", s.min as f64),
            ("q25", s.q25 as f64),
            ("median", s.median as f64),
            ("q75", s.q75 as f64),
            ("max", s.max as f64),
            ("mean", s.mean),
            ("spread", s.spread() as f64),
        ] {
            report.summary.push(ReportRow::summary(key, &format!("rank_{tag}_{stat}"), f.as_str(), v));
        }
    }
    let k = top_k.min(dist.features.len());
    for (pos, &f) in dist.top_k(k).iter().enumerate() {
        report.summary.push(ReportRow::summary(key, &format!("top_{tag}"), dist.features[f].as_str(), (pos + 1) as f64));
    }
    for (pos, &f) in dist.bottom_k(k).iter().enumerate() {
        report.summary.push(ReportRow::summary(key, &format!("bottom_{tag}"), dist.features[f].as_str(), (pos + 1) as f64));
    }
    let spreads: Vec<f64> = dist.summaries.iter().map(|s| s.spread() as f64).collect();
    report.summary.push(ReportRow::summary(key, &format!("rank_{tag}_spread_mean"), "", mean(&spreads)));
    Ok(())
}

/// Cross-run rank stability: per-feature rank distributions over seeds for
/// the pooled universe and for the noise view alone.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (raw, truth) = load_dataset(cfg)?;
    let levels = cfg.noise_levels.clone();
    let datasets = level_datasets(cfg, &raw, &levels)?;
    let conds = conditions(cfg, &levels);
    check_plans(cfg, &conds, |c| &datasets[levels.iter().position(|&l| l == c.level).expect("level")])?;
    let seeds: Vec<u64> = (0..cfg.runs).map(|i| derive_seed(cfg.master_seed, "stability", i)).collect();
    let focus = cfg.noise_view;

    let results = run_jobs(conds.len(), cfg.runs, |c, r| {
        let li = levels.iter().position(|&l| l == conds[c].level).expect("level");
        let plan = plan_for(cfg, &datasets[li], conds[c].fusion, conds[c].sizing)?;
        let fit = fit_and_attribute(cfg, &datasets[li], &plan, seeds[r])?;
        let (s, n) = fit.real_pooled()?;
        let (vs, vn) = fit.filtered(Universe::View(focus), |n| !is_noise_feature(n))?;
        Ok(StabilityRun {
            pooled: rank_features(&s, n)?,
            single: rank_features(&vs, vn)?,
            test_auc: fit.test_auc,
        })
    });

    let mut report = new_report(cfg)?;
    let runs = cfg.runs;
    for (c, cond) in conds.iter().enumerate() {
        let k = &cond.key;
        let mut ok_pooled = Vec::new();
        let mut ok_single = Vec::new();
        for r in 0..runs {
            let seed = seeds[r];
            match &results[c * runs + r] {
                Err(e) => report.rows.push(ReportRow::failure(k, r, seed, &e.to_string())),
                Ok(res) => {
                    for (f, &rank) in res.pooled.features.iter().zip(&res.pooled.ranks) {
                        report.rows.push(ReportRow::new(k, r, seed, "rank_pooled", rank as f64).with_item(f.as_str()));
                    }
                    for (f, &rank) in res.single.features.iter().zip(&res.single.ranks) {
                        report.rows.push(ReportRow::new(k, r, seed, "rank_view", rank as f64).with_item(f.as_str()));
                    }
                    if let Some(v) = res.test_auc {
                        report.rows.push(ReportRow::new(k, r, seed, "nn_test_auc", v));
                    }
                    ok_pooled.push(res.pooled.clone());
                    ok_single.push(res.single.clone());
                }
            }
        }
        if ok_pooled.is_empty() {
            continue;
        }
        emit_distribution(&mut report, k, "pooled", &ok_pooled, cfg.top_k)?;
        emit_distribution(&mut report, k, "view", &ok_single, cfg.top_k)?;
        if let Some(t) = &truth {
            let n_features = ok_pooled[0].len() as f64;
            let views = &raw.views;
            let planted: Vec<String> = t
                .informative
                .iter()
                .enumerate()
                .flat_map(|(v, fs)| fs.iter().map(move |&f| views[v].feature_names[f].clone()))
                .collect();
            let mut inside = 0usize;
            for name in &planted {
                let Some(row) = report
                    .summary
                    .iter()
                    .find(|r| r.condition == *k && r.metric == "rank_pooled_median" && r.item == *name)
                else {
                    continue;
                };
                let med = row.value;
                inside += usize::from(med <= 0.25 * n_features);
                report.summary.push(ReportRow::summary(k, "planted_median_rank_pooled", name.as_str(), med));
            }
            report.summary.push(ReportRow::summary(
                k,
                "planted_in_top_quartile_fraction",
                "",
                inside as f64 / planted.len().max(1) as f64,
            ));
        }
        summarize(&mut report, k, "nn_test_auc");
    }
    Ok(report)
}

fn cluster_quality(x: &Matrix, labels: &[usize], k: usize) -> Result<f64> {
    if x.rows() < k {
        return Err(Error::InvalidArgument("fewer rows than clusters".into()));
    }
    Ok(v_measure(labels, &ward_cluster(x, k)?)?.v_measure)
}

/// Subset performance: random forest AUC and Ward V-measure on the top-p%
/// attributed features against the all-feature baseline.
pub fn run_subset(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (raw, _) = load_dataset(cfg)?;
    let ds = prepare_level(&raw, cfg.noise_view, 0, 0, cfg.standardize)?;
    let test_idx = ds.indices(&[Split::Test]);
    if test_idx.is_empty() {
        return Err(Error::Config("subset experiment needs a non-empty test split".into()));
    }
    let final_idx = ds.indices(&[Split::Train, Split::Val]);
    let x_final = ds.pooled_matrix(&final_idx)?;
    let x_test = ds.pooled_matrix(&test_idx)?;
    let (y_final, y_test) = (ds.labels_at(&final_idx), ds.labels_at(&test_idx));
    let classes = ds.n_classes();
    let conds = conditions(cfg, &[0]);
    check_plans(cfg, &conds, |_| &ds)?;
    let seeds: Vec<u64> = (0..cfg.runs).map(|i| derive_seed(cfg.master_seed, "subset", i)).collect();
    let forest = |r: usize| ForestConfig {
        seed: derive_seed(cfg.master_seed, "forest", r),
        ..cfg.forest.clone()
    };
    let rf_auc = |cols: &[usize], r: usize| -> Result<f64> {
        let p = rf_fit_predict(&x_final.select_columns(cols), &y_final, classes, &x_test.select_columns(cols), &forest(r))?;
        auc_score(&y_test, &p)
    };
    let all_cols: Vec<usize> = (0..x_final.cols()).collect();

    let results = run_jobs(conds.len(), cfg.runs, |c, r| {
        let key = &conds[c].key;
        let seed = seeds[r];
        let plan = plan_for(cfg, &ds, conds[c].fusion, conds[c].sizing)?;
        let fit = fit_and_attribute(cfg, &ds, &plan, seed)?;
        let scores = aggregate_scores(&fit.attribution, Universe::Pooled)?;
        let ranking = rank_features(&scores, fit.attribution.universe_names(Universe::Pooled)?)?;
        let mut rows = Vec::new();
        if let Some(v) = fit.test_auc {
            rows.push(ReportRow::new(key, r, seed, "nn_test_auc", v));
        }
        rows.push(ReportRow::new(key, r, seed, "rf_auc_all", rf_auc(&all_cols, r)?));
        rows.push(ReportRow::new(key, r, seed, "v_measure_all_train", cluster_quality(&x_final, &y_final, classes)?));
        rows.push(ReportRow::new(key, r, seed, "v_measure_all_test", cluster_quality(&x_test, &y_test, classes)?));
        for &p in &cfg.percents {
            let mut cols = subset_top_p(&ranking, p)?;
            cols.sort_unstable();
            let item = format!("p={p}");
            rows.push(ReportRow::new(key, r, seed, "rf_auc_subset", rf_auc(&cols, r)?).with_item(item.as_str()));
            let vt = cluster_quality(&x_final.select_columns(&cols), &y_final, classes)?;
            rows.push(ReportRow::new(key, r, seed, "v_measure_subset_train", vt).with_item(item.as_str()));
            let vh = cluster_quality(&x_test.select_columns(&cols), &y_test, classes)?;
            rows.push(ReportRow::new(key, r, seed, "v_measure_subset_test", vh).with_item(item.as_str()));
        }
        Ok(rows)
    });

    let mut report = new_report(cfg)?;
    for (c, cond) in conds.iter().enumerate() {
        for r in 0..cfg.runs {
            match &results[c * cfg.runs + r] {
                Ok(rows) => report.rows.extend(rows.iter().cloned()),
                Err(e) => report.rows.push(ReportRow::failure(&cond.key, r, seeds[r], &e.to_string())),
            }
        }
        for m in ["nn_test_auc", "rf_auc_all", "v_measure_all_train", "v_measure_all_test"] {
            summarize(&mut report, &cond.key, m);
        }
        for &p in &cfg.percents {
            let item = format!("p={p}");
            for m in ["rf_auc_subset", "v_measure_subset_train", "v_measure_subset_test"] {
                let v: Vec<f64> = report
                    .rows
                    .iter()
                    .filter(|row| row.condition == cond.key && row.metric == m && row.item == item && row.value.is_finite())
                    .map(|row| row.value)
                    .collect();
                if !v.is_empty() {
                    report.summary.push(ReportRow::summary(&cond.key, &format!("{m}_mean"), item.as_str(), mean(&v)));
                }
            }
        }
    }
    Ok(report)
}

/// Dispatches on the experiment kind, optionally inside a dedicated thread
/// pool of `threads` workers, and records wall-clock timestamps.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Timestamps::now_unix();
    let go = || match cfg.kind {
        ExperimentKind::Compression => run_compression(cfg),
        ExperimentKind::Stability => run_stability(cfg),
        ExperimentKind::Subset => run_subset(cfg),
    };
    let mut report = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(go)?,
        None => go()?,
    };
    report.timestamps = Some(Timestamps {
        started_unix: started,
        finished_unix: Timestamps::now_unix(),
    });
    Ok(report)
}
