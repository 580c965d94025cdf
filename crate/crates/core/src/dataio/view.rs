use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::Matrix;

/// First header cell of every view CSV.
pub const SAMPLE_ID_COLUMN: &str = "sample_id";

/// One omics view: samples × features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewMatrix {
    pub view_id: String,
    pub sample_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub values: Matrix,
}

impl ViewMatrix {
    pub fn new(
        view_id: impl Into<String>,
        sample_ids: Vec<String>,
        feature_names: Vec<String>,
        values: Matrix,
    ) -> Result<Self> {
        let v = ViewMatrix {
            view_id: view_id.into(),
            sample_ids,
            feature_names,
            values,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.shape() != (self.sample_ids.len(), self.feature_names.len()) {
            return Err(Error::shape(
                "ViewMatrix values",
                format!("{}x{}", self.sample_ids.len(), self.feature_names.len()),
                format!("{}x{}", self.values.rows(), self.values.cols()),
            ));
        }
        if let Some(d) = first_duplicate(&self.sample_ids) {
            return Err(Error::Dataset(format!(
                "view {}: duplicate sample id {d:?}",
                self.view_id
            )));
        }
        if let Some(d) = first_duplicate(&self.feature_names) {
            return Err(Error::Dataset(format!(
                "view {}: duplicate feature name {d:?}",
                self.view_id
            )));
        }
        self.values
            .ensure_finite(&format!("view {} values", self.view_id))
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

fn first_duplicate(items: &[String]) -> Option<&String> {
    let mut seen = HashSet::with_capacity(items.len());
    items.iter().find(|s| !seen.insert(s.as_str()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Replace missing cells with the feature's median instead of failing.
    pub impute_median: bool,
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim(),
        "" | "NA" | "na" | "N/A" | "NaN" | "nan" | "null" | "NULL"
    )
}

/// Reads a view CSV: header `sample_id,<feature>...`, one row per sample.
pub fn load_view_csv(path: &Path, view_id: &str, opts: LoadOptions) -> Result<ViewMatrix> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(parse_err("empty file".into()));
    }
    if headers.get(0).map(str::trim) != Some(SAMPLE_ID_COLUMN) {
        return Err(parse_err(format!(
            "first column must be {SAMPLE_ID_COLUMN:?}, found {:?}",
            headers.get(0).unwrap_or("")
        )));
    }
    let feature_names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    if feature_names.is_empty() {
        return Err(parse_err("no feature columns".into()));
    }
    let p = feature_names.len();

    let mut sample_ids = Vec::new();
    let mut cells: Vec<Option<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let line = r + 2;
        if record.len() != p + 1 {
            return Err(parse_err(format!(
                "line {line}: expected {} cells, found {}",
                p + 1,
                record.len()
            )));
        }
        sample_ids.push(record[0].trim().to_string());
        for (c, cell) in record.iter().skip(1).enumerate() {
            if is_missing(cell) {
                if !opts.impute_median {
                    return Err(parse_err(format!(
                        "line {line}, column {:?}: missing value {cell:?}",
                        feature_names[c]
                    )));
                }
                cells.push(None);
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| {
                parse_err(format!(
                    "line {line}, column {:?}: non-numeric value {cell:?}",
                    feature_names[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(parse_err(format!(
                    "line {line}, column {:?}: non-finite value {cell:?}",
                    feature_names[c]
                )));
            }
            cells.push(Some(v));
        }
    }
    if sample_ids.is_empty() {
        return Err(parse_err("no sample rows".into()));
    }

    let n = sample_ids.len();
    let mut data = vec![0.0; n * p];
    for c in 0..p {
        let mut observed: Vec<f64> = (0..n).filter_map(|r| cells[r * p + c]).collect();
        let fill = if observed.len() < n {
            if observed.is_empty() {
                return Err(parse_err(format!(
                    "column {:?}: every value missing, cannot impute",
                    feature_names[c]
                )));
            }
            median(&mut observed)
        } else {
            0.0
        };
        for r in 0..n {
            data[r * p + c] = cells[r * p + c].unwrap_or(fill);
        }
    }
    let values = Matrix::from_vec(n, p, data)?;
    ViewMatrix::new(view_id, sample_ids, feature_names, values).map_err(|e| match e {
        Error::Dataset(m) => parse_err(m),
        e => e,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Writes a view CSV using shortest round-trip decimal formatting.
pub fn write_view_csv(view: &ViewMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = Vec::with_capacity(view.n_features() + 1);
    header.push(SAMPLE_ID_COLUMN.to_string());
    header.extend(view.feature_names.iter().cloned());
    w.write_record(&header)?;
    for (r, id) in view.sample_ids.iter().enumerate() {
        let mut rec = Vec::with_capacity(view.n_features() + 1);
        rec.push(id.clone());
        rec.extend(view.values.row(r).iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn na_rejected_unless_imputing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "v.csv", "sample_id,a,b\ns1,1,2\ns2,NA,4\ns3,5,6\n");
        let err = load_view_csv(&p, "v", LoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("\"a\""), "{msg}");
        let v = load_view_csv(&p, "v", LoadOptions { impute_median: true }).unwrap();
        assert_eq!(v.values.column(0), vec![1.0, 3.0, 5.0]);
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "v.csv", "sample_id,a,b\ns1,1,x\n");
        let msg = load_view_csv(&p, "v", LoadOptions::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("line 2") && msg.contains("\"b\""), "{msg}");
    }

    #[test]
    fn duplicate_sample_and_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "v.csv", "sample_id,a\ns1,1\ns1,2\n");
        assert!(load_view_csv(&p, "v", LoadOptions::default()).is_err());
        let p = write(&dir, "e.csv", "");
        assert!(load_view_csv(&p, "v", LoadOptions::default()).is_err());
        let p = write(&dir, "h.csv", "sample_id,a\n");
        assert!(load_view_csv(&p, "v", LoadOptions::default()).is_err());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let vals = vec![0.1 + 0.2, -1e-300, 1.0 / 3.0, 6.02e23, -0.0, 5e-324];
        let v = ViewMatrix::new(
            "v",
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "y".into()],
            Matrix::from_vec(3, 2, vals).unwrap(),
        )
        .unwrap();
        let p = dir.path().join("rt.csv");
        write_view_csv(&v, &p).unwrap();
        let back = load_view_csv(&p, "v", LoadOptions::default()).unwrap();
        let bits = |m: &Matrix| m.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.values), bits(&v.values));
        assert_eq!(back, v);
    }
}
