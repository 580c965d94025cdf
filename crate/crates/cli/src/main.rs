use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use shapaudit::attribution::{aggregate_scores, rank_features, AttributionSummary, Universe};
use shapaudit::dataio::{synth_multiview, write_labels_csv, write_view_csv, DatasetManifest, Split, SynthConfig};
use shapaudit::harness::{
    attribute_model, default_plots, emit_boxplot_svg, load_dataset, new_report, plan_for, prepare_level,
    run_experiment, write_outputs, ExperimentConfig, ExperimentKind, ExperimentReport, GroupKey, PlotConfig, PlotSpec,
    ReportRow, FAILURE_METRIC, REPORT_FILE,
};
use shapaudit::multiview::{train, TrainedModel};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<shapaudit::Error> for CliError {
    fn from(e: shapaudit::Error) -> Self {
        match e {
            shapaudit::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Multi-view classifier training, DeepSHAP attribution and attribution
/// consistency experiments.
#[derive(Debug, Parser)]
#[command(name = "shapaudit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON, or TOML with a .toml extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model on the configured dataset and save it as model.json.
    Train(Common),
    /// Attribute the train and validation rows with a saved model.
    Attribute {
        #[command(flatten)]
        common: Common,
        /// Model written by `train`.
        #[arg(long)]
        model: PathBuf,
    },
    /// Write a synthetic dataset as CSV files plus its planted ground truth.
    SynthGen {
        /// Synthetic dataset config, or an experiment config with a synthetic source.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one of the three experiments and write its report and figures.
    Experiment {
        kind: KindArg,
        #[command(flatten)]
        common: Common,
        /// Overrides the number of runs per condition.
        #[arg(long)]
        runs: Option<usize>,
        /// Worker threads for concurrent runs.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Draw boxplots from a saved report.
    Plot {
        /// report.json, or a directory containing one.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Metric to plot; the standard figures for the report's kind otherwise.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long, value_enum, default_value_t = GroupArg::Condition)]
        group: GroupArg,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Compression,
    Stability,
    Subset,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Compression => ExperimentKind::Compression,
            KindArg::Stability => ExperimentKind::Stability,
            KindArg::Subset => ExperimentKind::Subset,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GroupArg {
    Condition,
    Item,
    ConditionItem,
}

impl From<GroupArg> for GroupKey {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::Condition => GroupKey::Condition,
            GroupArg::Item => GroupKey::Item,
            GroupArg::ConditionItem => GroupKey::ConditionItem,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SHAPAUDIT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(common) => cmd_train(&common),
        Command::Attribute { common, model } => cmd_attribute(&common, &model),
        Command::SynthGen { config, out, seed } => cmd_synth_gen(&config, &out, seed),
        Command::Experiment {
            kind,
            common,
            runs,
            threads,
        } => cmd_experiment(kind.into(), &common, runs, threads),
        Command::Plot {
            report,
            out,
            metric,
            group,
            title,
        } => cmd_plot(&report, &out, metric.as_deref(), group.into(), title),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// The zero-noise dataset that `train` and `attribute` both work on.
fn prepared_dataset(cfg: &ExperimentConfig) -> CliResult<shapaudit::dataio::MultiViewDataset> {
    let (raw, _) = load_dataset(cfg)?;
    Ok(prepare_level(&raw, cfg.noise_view, 0, cfg.master_seed, cfg.standardize)?)
}

#[derive(Serialize)]
struct TrainMetrics {
    seed: u64,
    fusion: String,
    config_hash: String,
    stopping_iteration: usize,
    final_iterations: usize,
    test_auc: Option<f64>,
}

fn cmd_train(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let ds = prepared_dataset(&cfg)?;
    let fusion = cfg.fusion[0];
    let plan = plan_for(&cfg, &ds, fusion, cfg.sizing[0])?;
    let mut tc = cfg.train.clone();
    tc.seed = cfg.master_seed;
    info!("training {} fusion model with seed {}", fusion.name(), tc.seed);
    let model = train(&plan, &ds, &tc)?;
    let test_idx = ds.indices(&[Split::Test]);
    let test_auc = if test_idx.is_empty() {
        None
    } else {
        let probs = model.predict_proba(&ds.view_inputs(&test_idx), &ds.mask.select_rows(&test_idx))?;
        shapaudit::downstream::auc_score(&ds.labels_at(&test_idx), &probs).ok()
    };
    create_dir(&common.out)?;
    model.save(&common.out.join("model.json"))?;
    write_json(
        &TrainMetrics {
            seed: tc.seed,
            fusion: fusion.name().to_string(),
            config_hash: cfg.hash()?,
            stopping_iteration: model.stopping_iteration,
            final_iterations: model.final_iterations,
            test_auc,
        },
        &common.out.join("metrics.json"),
    )
}

fn cmd_attribute(common: &Common, model_path: &Path) -> CliResult<()> {
    let cfg = load_config(common)?;
    let ds = prepared_dataset(&cfg)?;
    let model = TrainedModel::load(model_path)?;
    if model.plan().input_dims() != ds.input_dims() {
        return Err(CliError::Config(format!(
            "model expects view widths {:?}, dataset has {:?}",
            model.plan().input_dims(),
            ds.input_dims()
        )));
    }
    let train_rows = ds.indices(&[Split::Train]).len();
    let backgrounds = cfg.background.map_or(train_rows, |k| k.min(train_rows));
    let fitted = attribute_model(&cfg, &ds, model, cfg.master_seed)?;
    let res = &fitted.attribution;
    let rows = ds.indices(&[Split::Train, Split::Val]);
    let sample_ids: Vec<String> = rows.iter().map(|&i| ds.sample_ids[i].clone()).collect();
    let view_ids: Vec<String> = ds.views.iter().map(|v| v.view_id.clone()).collect();
    create_dir(&common.out)?;
    res.write_csv(&common.out.join("phi.csv"), &sample_ids, &ds.class_names, &view_ids)?;
    let universes = std::iter::once((Universe::Pooled, "pooled".to_string()))
        .chain(view_ids.iter().enumerate().map(|(v, id)| (Universe::View(v), id.clone())));
    for (universe, label) in universes {
        let ranking = rank_features(&aggregate_scores(res, universe)?, res.universe_names(universe)?)?;
        let summary = AttributionSummary {
            universe,
            samples: res.samples,
            classes: res.classes,
            backgrounds,
            ranking,
        };
        write_json(&summary, &common.out.join(format!("ranking_{label}.json")))?;
    }
    if let Some(auc) = fitted.test_auc {
        info!("test AUC {auc:.4}");
    }
    Ok(())
}

/// Accepts either a bare synthetic config or an experiment config whose
/// dataset is synthetic.
fn load_synth_config(path: &Path) -> CliResult<SynthConfig> {
    let bad = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let mut value: serde_json::Value = if is_toml {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    if let Some(dataset) = value.get_mut("dataset") {
        if dataset.get("source").and_then(|s| s.as_str()) != Some("synth") {
            return Err(bad("dataset source is not synthetic".into()));
        }
        value = dataset.take();
        if let Some(obj) = value.as_object_mut() {
            obj.remove("source");
        }
    }
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

#[derive(Serialize)]
struct TruthFile {
    views: Vec<TruthView>,
}

#[derive(Serialize)]
struct TruthView {
    view_id: String,
    informative: Vec<usize>,
    features: Vec<String>,
}

fn cmd_synth_gen(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let mut sc = load_synth_config(config)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    let (ds, truth) = synth_multiview(&sc)?;
    create_dir(out)?;
    let mut manifest = DatasetManifest {
        files: Vec::new(),
        split_seed: sc.seed,
        fractions: sc.fractions,
        transform: None,
    };
    for v in &ds.views {
        let path = out.join(format!("{}.csv", v.view_id));
        write_view_csv(v, &path)?;
        manifest.add_file(format!("view:{}", v.view_id), &path)?;
    }
    let labels = out.join("labels.csv");
    write_labels_csv(&ds, &labels)?;
    manifest.add_file("labels", &labels)?;
    let views = ds
        .views
        .iter()
        .zip(&truth.informative)
        .map(|(v, idx)| TruthView {
            view_id: v.view_id.clone(),
            informative: idx.clone(),
            features: idx.iter().map(|&i| v.feature_names[i].clone()).collect(),
        })
        .collect();
    write_json(&TruthFile { views }, &out.join("truth.json"))?;
    manifest.write(&out.join("manifest.json"))?;
    info!("wrote {} samples to {}", ds.n_samples(), out.display());
    Ok(())
}

fn cmd_experiment(kind: ExperimentKind, common: &Common, runs: Option<usize>, threads: Option<usize>) -> CliResult<()> {
    let mut cfg = load_config(common)?;
    if cfg.kind != kind {
        warn!("config kind '{}' overridden by '{}'", cfg.kind.name(), kind.name());
        cfg.kind = kind;
    }
    if let Some(r) = runs {
        cfg.runs = r;
    }
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    cfg.validate()?;
    let report = match run_experiment(&cfg, threads) {
        Ok(report) => report,
        Err(shapaudit::Error::Config(m)) => return Err(CliError::Config(m)),
        Err(e) => {
            // Nothing usable came back; record the failure so the output
            // directory still explains what happened.
            let mut report = new_report(&cfg)?;
            report.rows.push(ReportRow {
                condition: "experiment".into(),
                run: None,
                seed: None,
                metric: FAILURE_METRIC.into(),
                item: e.to_string(),
                value: f64::NAN,
            });
            report.write(&common.out)?;
            return Err(CliError::Runtime(e.to_string()));
        }
    };
    write_outputs(&report, &cfg, &common.out)?;
    match report.failures() {
        0 => Ok(()),
        n => Err(CliError::Runtime(format!(
            "{n} run(s) failed; partial report written to {}",
            common.out.display()
        ))),
    }
}

fn cmd_plot(report: &Path, out: &Path, metric: Option<&str>, group: GroupKey, title: Option<String>) -> CliResult<()> {
    let path = if report.is_dir() { report.join(REPORT_FILE) } else { report.to_path_buf() };
    let rep = ExperimentReport::load_json(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    create_dir(out)?;
    let specs = match metric {
        Some(m) => {
            let mut spec = PlotSpec::new(m, group);
            spec.title = title.unwrap_or_else(|| m.to_string());
            vec![(format!("{m}.svg"), spec)]
        }
        None => {
            let kind: ExperimentKind = serde_json::from_value(serde_json::Value::String(rep.provenance.experiment.clone()))
                .map_err(|_| CliError::Config(format!("unknown experiment kind '{}'", rep.provenance.experiment)))?;
            default_plots(&rep, kind, &PlotConfig::default())
        }
    };
    for (name, spec) in specs {
        emit_boxplot_svg(&rep, &spec, &out.join(&name))?;
        info!("wrote {name}");
    }
    Ok(())
}
