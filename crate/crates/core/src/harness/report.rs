use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Metric name used for rows that record a failed run.
pub const FAILURE_METRIC: &str = "failure";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub condition: String,
    pub run: Option<usize>,
    pub seed: Option<u64>,
    pub metric: String,
    /// Feature name, subset percent or failure message; empty otherwise.
    pub item: String,
    /// Non-finite values (failures) travel through JSON as `null`.
    #[serde(with = "nan_as_null")]
    pub value: f64,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl ReportRow {
    pub fn new(condition: &str, run: usize, seed: u64, metric: &str, value: f64) -> Self {
        ReportRow {
            condition: condition.to_string(),
            run: Some(run),
            seed: Some(seed),
            metric: metric.to_string(),
            item: String::new(),
            value,
        }
    }

    pub fn with_item(mut self, item: impl Into<String>) -> Self {
        self.item = item.into();
        self
    }

    pub fn failure(condition: &str, run: usize, seed: u64, message: &str) -> Self {
        ReportRow::new(condition, run, seed, FAILURE_METRIC, f64::NAN).with_item(message)
    }

    pub fn summary(condition: &str, metric: &str, item: impl Into<String>, value: f64) -> Self {
        ReportRow {
            condition: condition.to_string(),
            run: None,
            seed: None,
            metric: metric.to_string(),
            item: item.into(),
            value,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.metric == FAILURE_METRIC
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
}

/// Wall-clock bounds of a run, kept out of the reproducible outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix: f64,
    pub finished_unix: f64,
}

impl Timestamps {
    pub fn now_unix() -> f64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    /// Per-run rows in (condition, run) order.
    pub rows: Vec<ReportRow>,
    /// Cross-run aggregates.
    pub summary: Vec<ReportRow>,
    #[serde(skip)]
    pub timestamps: Option<Timestamps>,
}

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TIMESTAMPS_FILE: &str = "timestamps.json";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn write_rows(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["condition", "run", "seed", "metric", "item", "value"])?;
    for r in rows {
        w.write_record([
            r.condition.as_str(),
            &opt(r.run),
            &opt(r.seed),
            &r.metric,
            &r.item,
            &r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.is_failure()).count()
    }

    pub fn metric_values<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows
            .iter()
            .chain(&self.summary)
            .filter(move |r| r.metric == metric)
    }

    /// Finite values of `metric` in one condition, in row order.
    pub fn values(&self, condition: &str, metric: &str) -> Vec<f64> {
        self.metric_values(metric)
            .filter(|r| r.condition == condition && r.value.is_finite())
            .map(|r| r.value)
            .collect()
    }

    /// Writes rows.csv, summary.csv and report.json (byte-stable), plus
    /// timestamps.json when timestamps were recorded.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_rows(&self.rows, &dir.join(ROWS_FILE))?;
        write_rows(&self.summary, &dir.join(SUMMARY_FILE))?;
        std::fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        if let Some(t) = &self.timestamps {
            std::fs::write(dir.join(TIMESTAMPS_FILE), serde_json::to_string_pretty(t)? + "\n")?;
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> ExperimentReport {
        ExperimentReport {
            provenance: Provenance {
                experiment: "stability".into(),
                config_hash: "abc".into(),
                code_version: "0".into(),
                master_seed: 1,
            },
            rows: vec![
                ReportRow::new("c", 0, 5, "tau", 0.25),
                ReportRow::failure("c", 1, 6, "boom, with comma"),
            ],
            summary: vec![ReportRow::summary("c", "median", "", 0.25)],
            timestamps: None,
        }
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        report().write(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(ROWS_FILE)).unwrap();
        assert_eq!(
            text,
            "condition,run,seed,metric,item,value\nc,0,5,tau,,0.25\nc,1,6,failure,\"boom, with comma\",NaN\n"
        );
        assert!(!dir.path().join(TIMESTAMPS_FILE).exists());
        let back = ExperimentReport::load_json(&dir.path().join(REPORT_FILE)).unwrap();
        assert_eq!(back.rows[0], report().rows[0]);
        assert!(back.rows[1].value.is_nan());
    }

    #[test]
    fn failure_count() {
        assert_eq!(report().failures(), 1);
        assert_eq!(report().values("c", "tau"), vec![0.25]);
    }
}
