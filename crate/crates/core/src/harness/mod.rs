//! Config-driven experiments (noise compression, rank stability, top-p
//! subsets), long-form reports and SVG boxplots.

mod config;
mod experiments;
mod report;
mod svg;

pub use config::{BasePlan, CsvViewSource, DatasetSource, ExperimentConfig, ExperimentKind, PlotConfig, ViewWidths};
pub use experiments::{
    attribute_model, derive_seed, fit_and_attribute, load_dataset, new_report, plan_for, prepare_level,
    run_compression, run_experiment, run_stability, run_subset, FittedRun,
};
pub use report::{
    ExperimentReport, Provenance, ReportRow, Timestamps, FAILURE_METRIC, REPORT_FILE, ROWS_FILE, SUMMARY_FILE,
    TIMESTAMPS_FILE,
};
pub use svg::{collect_groups, emit_boxplot_svg, frame_for, render_boxplot_svg, BoxStats, Frame, GroupKey, PlotSpec};

use std::path::Path;

use crate::error::Result;

/// The standard figures for a report of the given kind.
pub fn default_plots(report: &ExperimentReport, kind: ExperimentKind, plot: &PlotConfig) -> Vec<(String, PlotSpec)> {
    let spec = |metric: &str, group: GroupKey, title: &str| {
        let mut s = PlotSpec::new(metric, group);
        s.title = title.to_string();
        s.width = plot.width;
        s.height = plot.height;
        if let Some(x) = &plot.x_label {
            s.x_label = x.clone();
        }
        if let Some(y) = &plot.y_label {
            s.y_label = y.clone();
        }
        s
    };
    match kind {
        ExperimentKind::Compression => vec![
            (
                "tau_reference.svg".into(),
                spec("tau_w_reference", GroupKey::Condition, "Weighted tau against zero-noise run"),
            ),
            (
                "tau_cross_seed.svg".into(),
                spec("tau_w_cross_seed", GroupKey::Condition, "Weighted tau between runs"),
            ),
        ],
        ExperimentKind::Stability => {
            let first = report.summary.first().map(|r| r.condition.clone()).unwrap_or_default();
            let mut out = Vec::new();
            for tag in ["pooled", "view"] {
                let pick = |m: String| -> Vec<String> {
                    report
                        .summary
                        .iter()
                        .filter(|r| r.condition == first && r.metric == m)
                        .map(|r| r.item.clone())
                        .collect()
                };
                let mut groups = pick(format!("top_{tag}"));
                let mut bottom = pick(format!("bottom_{tag}"));
                bottom.reverse();
                for b in bottom {
                    if !groups.contains(&b) {
                        groups.push(b);
                    }
                }
                let mut s = spec(&format!("rank_{tag}"), GroupKey::Item, &format!("Rank distribution ({tag})"));
                s.groups = Some(groups);
                out.push((format!("ranks_{tag}.svg"), s));
            }
            out
        }
        ExperimentKind::Subset => vec![
            (
                "rf_auc_subset.svg".into(),
                spec("rf_auc_subset", GroupKey::ConditionItem, "Random forest AUC on top-p% features"),
            ),
            ("rf_auc_all.svg".into(), spec("rf_auc_all", GroupKey::Condition, "Random forest AUC, all features")),
        ],
    }
}

/// Writes the report files and the standard figures into `dir`. Figures
/// that cannot be drawn (for example when every run failed) are skipped.
pub fn write_outputs(report: &ExperimentReport, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    report.write(dir)?;
    for (name, spec) in default_plots(report, cfg.kind, &cfg.plot) {
        if let Err(e) = emit_boxplot_svg(report, &spec, &dir.join(&name)) {
            log::warn!("skipping {name}: {e}");
        }
    }
    Ok(())
}
