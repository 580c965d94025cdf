use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::view::{ViewMatrix, SAMPLE_ID_COLUMN};
use crate::error::{Error, Result};
use crate::multiview::{LayerPlan, PresenceMask};
use crate::nncore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Sample labels as read from a `sample_id,label` CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    pub sample_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabelTable {
    /// Class indices follow the sorted order of the distinct label strings.
    pub fn from_strings(sample_ids: Vec<String>, raw: &[String]) -> Result<Self> {
        if sample_ids.len() != raw.len() {
            return Err(Error::shape("labels", sample_ids.len(), raw.len()));
        }
        let class_names: Vec<String> = raw.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let index: HashMap<&str, usize> = class_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let labels = raw.iter().map(|r| index[r.as_str()]).collect();
        Ok(LabelTable {
            sample_ids,
            labels,
            class_names,
        })
    }
}

pub fn load_labels_csv(path: &Path) -> Result<LabelTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || headers.get(0).map(str::trim) != Some(SAMPLE_ID_COLUMN) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "labels header must be `sample_id,label`".into(),
        });
    }
    let mut ids = Vec::new();
    let mut raw = Vec::new();
    for record in reader.records() {
        let record = record?;
        ids.push(record[0].trim().to_string());
        raw.push(record[1].trim().to_string());
    }
    if ids.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "no label rows".into(),
        });
    }
    LabelTable::from_strings(ids, &raw)
}

pub fn write_labels_csv(ds: &MultiViewDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([SAMPLE_ID_COLUMN, "label"])?;
    for (id, &l) in ds.sample_ids.iter().zip(&ds.labels) {
        w.write_record([id.as_str(), ds.class_names[l].as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Row-aligned views with labels, split tags and a presence mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewDataset {
    pub sample_ids: Vec<String>,
    pub views: Vec<ViewMatrix>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub splits: Vec<Split>,
    pub mask: PresenceMask,
}

impl MultiViewDataset {
    /// Aligns every view to the label table's sample order.
    ///
    /// A sample absent from a view is an error unless `allow_missing_views`
    /// is set, in which case its row is zero-filled and masked out. Every
    /// sample still needs at least one view. All samples start in the train
    /// split.
    pub fn assemble(
        views: Vec<ViewMatrix>,
        labels: LabelTable,
        allow_missing_views: bool,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Dataset("no views".into()));
        }
        let n = labels.sample_ids.len();
        let mut present = vec![vec![false; views.len()]; n];
        let mut aligned = Vec::with_capacity(views.len());
        for (v, view) in views.into_iter().enumerate() {
            view.validate()?;
            let rows: HashMap<&str, usize> = view
                .sample_ids
                .iter()
                .enumerate()
                .map(|(i, s)| (s.as_str(), i))
                .collect();
            let p = view.n_features();
            let mut data = vec![0.0; n * p];
            for (s, id) in labels.sample_ids.iter().enumerate() {
                match rows.get(id.as_str()) {
                    Some(&r) => {
                        data[s * p..(s + 1) * p].copy_from_slice(view.values.row(r));
                        present[s][v] = true;
                    }
                    None if allow_missing_views => {}
                    None => {
                        return Err(Error::Dataset(format!(
                            "sample {id:?} missing from view {:?}",
                            view.view_id
                        )))
                    }
                }
            }
            aligned.push(ViewMatrix {
                view_id: view.view_id,
                sample_ids: labels.sample_ids.clone(),
                feature_names: view.feature_names,
                values: Matrix::from_vec(n, p, data)?,
            });
        }
        if let Some(s) = present.iter().position(|r| !r.iter().any(|&p| p)) {
            return Err(Error::Dataset(format!(
                "sample {:?} is absent from every view",
                labels.sample_ids[s]
            )));
        }
        let ds = MultiViewDataset {
            sample_ids: labels.sample_ids,
            views: aligned,
            labels: labels.labels,
            class_names: labels.class_names,
            splits: vec![Split::Train; n],
            mask: PresenceMask::new(present)?,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sample_ids.len();
        if n == 0 {
            return Err(Error::Dataset("no samples".into()));
        }
        if self.labels.len() != n || self.splits.len() != n || self.mask.samples() != n {
            return Err(Error::Dataset("per-sample vectors disagree in length".into()));
        }
        if self.mask.views() != self.views.len() {
            return Err(Error::Dataset("mask view count mismatch".into()));
        }
        for v in &self.views {
            if v.sample_ids != self.sample_ids {
                return Err(Error::Dataset(format!("view {:?} is not row-aligned", v.view_id)));
            }
            v.validate()?;
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.class_names.len()) {
            return Err(Error::LabelOutOfRange {
                label: l,
                classes: self.class_names.len(),
            });
        }
        let mut in_train = vec![false; self.class_names.len()];
        for (&l, &s) in self.labels.iter().zip(&self.splits) {
            if s == Split::Train {
                in_train[l] = true;
            }
        }
        if let Some(c) = in_train.iter().position(|&b| !b) {
            return Err(Error::Dataset(format!(
                "class {:?} has no training sample",
                self.class_names[c]
            )));
        }
        Ok(())
    }

    pub fn with_splits(mut self, splits: Vec<Split>) -> Result<Self> {
        if splits.len() != self.sample_ids.len() {
            return Err(Error::shape("with_splits", self.sample_ids.len(), splits.len()));
        }
        self.splits = splits;
        self.validate()?;
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.views.iter().map(ViewMatrix::n_features).collect()
    }

    /// Sample indices whose split is in `splits`, ascending.
    pub fn indices(&self, splits: &[Split]) -> Vec<usize> {
        (0..self.n_samples())
            .filter(|&i| splits.contains(&self.splits[i]))
            .collect()
    }

    pub fn view_inputs(&self, idx: &[usize]) -> Vec<Matrix> {
        self.views.iter().map(|v| v.values.select_rows(idx)).collect()
    }

    pub fn labels_at(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }

    /// Every view's features side by side, in view order.
    pub fn pooled_matrix(&self, idx: &[usize]) -> Result<Matrix> {
        let blocks = self.view_inputs(idx);
        let refs: Vec<&Matrix> = blocks.iter().collect();
        Matrix::hconcat(&refs)
    }

    /// `(view, feature)` pairs in pooled order.
    pub fn pooled_features(&self) -> Vec<(usize, usize)> {
        self.views
            .iter()
            .enumerate()
            .flat_map(|(v, m)| (0..m.n_features()).map(move |f| (v, f)))
            .collect()
    }

    pub fn check_plan(&self, plan: &LayerPlan) -> Result<()> {
        if plan.input_dims() != self.input_dims() {
            return Err(Error::shape(
                "plan input dims",
                format!("{:?}", self.input_dims()),
                format!("{:?}", plan.input_dims()),
            ));
        }
        if plan.classes != self.n_classes() {
            return Err(Error::shape("plan classes", self.n_classes(), plan.classes));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(id: &str, samples: &[&str]) -> ViewMatrix {
        let n = samples.len();
        ViewMatrix::new(
            id,
            samples.iter().map(|s| s.to_string()).collect(),
            vec!["f".into()],
            Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap(),
        )
        .unwrap()
    }

    fn labels(ids: &[&str]) -> LabelTable {
        let raw: Vec<String> = ids.iter().enumerate().map(|(i, _)| ["b", "a"][i % 2].into()).collect();
        LabelTable::from_strings(ids.iter().map(|s| s.to_string()).collect(), &raw).unwrap()
    }

    #[test]
    fn aligns_to_label_order() {
        let ds = MultiViewDataset::assemble(
            vec![view("v1", &["s2", "s1"]), view("v2", &["s1", "s2"])],
            labels(&["s1", "s2"]),
            false,
        )
        .unwrap();
        assert_eq!(ds.views[0].values.column(0), vec![1.0, 0.0]);
        assert_eq!(ds.views[1].values.column(0), vec![0.0, 1.0]);
        assert_eq!(ds.class_names, vec!["a", "b"]);
        assert_eq!(ds.labels, vec![1, 0]);
    }

    #[test]
    fn disjoint_samples_rejected() {
        let r = MultiViewDataset::assemble(
            vec![view("v1", &["s1", "s2"]), view("v2", &["s3", "s4"])],
            labels(&["s1", "s2"]),
            false,
        );
        assert!(r.is_err());
        let r = MultiViewDataset::assemble(
            vec![view("v1", &["s1"]), view("v2", &["s3"])],
            labels(&["s1", "s2"]),
            true,
        );
        assert!(r.is_err());
    }

    #[test]
    fn missing_views_masked_when_allowed() {
        let ds = MultiViewDataset::assemble(
            vec![view("v1", &["s1", "s2"]), view("v2", &["s1"])],
            labels(&["s1", "s2"]),
            true,
        )
        .unwrap();
        assert!(ds.mask.is_present(0, 1));
        assert!(!ds.mask.is_present(1, 1));
        assert_eq!(ds.views[1].values.get(1, 0), 0.0);
    }
}
