use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{streams, Matrix, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    /// Candidate features per split; `None` means `floor(sqrt(P))`.
    pub max_features: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub stream: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 500,
            max_features: None,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
            stream: streams::BOOTSTRAP,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidArgument("forest needs at least one tree".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidArgument("min leaf size must be >= 1".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::InvalidArgument("max_features must be >= 1".into()));
        }
        Ok(())
    }

    pub fn features_per_split(&self, p: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (p as f64).sqrt().floor() as usize)
            .clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classification tree with Gini splits; `x <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    classes: usize,
    mtry: usize,
    min_leaf: usize,
    perm: Vec<usize>,
    pairs: Vec<(f64, usize)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini_sum(counts: &[usize], total: usize) -> f64 {
    // total · gini, so child impurities add without renormalizing
    let t = total as f64;
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    t - sq / t
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn best_for_feature(&mut self, idx: &[usize], f: usize, parent: &[usize]) -> Option<BestSplit> {
        self.pairs.clear();
        self.pairs.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
        self.pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = self.pairs.len();
        if self.pairs[0].0 == self.pairs[n - 1].0 {
            return None;
        }
        let mut left = vec![0; self.classes];
        let mut right = parent.to_vec();
        let mut best: Option<BestSplit> = None;
        for k in 0..n - 1 {
            let (v, c) = self.pairs[k];
            left[c] += 1;
            right[c] -= 1;
            let next = self.pairs[k + 1].0;
            let n_left = k + 1;
            if v == next || n_left < self.min_leaf || n - n_left < self.min_leaf {
                continue;
            }
            let impurity = gini_sum(&left, n_left) + gini_sum(&right, n - n_left);
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mid = 0.5 * (v + next);
                let threshold = if mid < next { mid } else { v };
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    impurity,
                });
            }
        }
        best
    }

    /// Draws features without replacement until `mtry` non-constant ones
    /// have been evaluated (or all are exhausted).
    fn best_split(&mut self, idx: &[usize], parent: &[usize], rng: &mut Rng) -> Option<BestSplit> {
        let p = self.perm.len();
        let mut best: Option<BestSplit> = None;
        let mut evaluated = 0;
        for j in 0..p {
            if evaluated >= self.mtry {
                break;
            }
            let k = j + rng.below(p - j);
            self.perm.swap(j, k);
            let f = self.perm[j];
            let Some(s) = self.best_for_feature(idx, f, parent) else {
                continue;
            };
            evaluated += 1;
            if best.as_ref().is_none_or(|b| s.impurity < b.impurity) {
                best = Some(s);
            }
        }
        best
    }

    fn leaf(&self, counts: &[usize], total: usize) -> Node {
        Node::Leaf(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    fn grow(&mut self, sample: Vec<usize>, rng: &mut Rng) -> DecisionTree {
        let mut nodes = Vec::new();
        let mut stack = vec![(sample, 0usize)];
        nodes.push(Node::Leaf(Vec::new()));
        while let Some((idx, slot)) = stack.pop() {
            let counts = self.counts(&idx);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            if pure || idx.len() < 2 * self.min_leaf {
                nodes[slot] = self.leaf(&counts, idx.len());
                continue;
            }
            let Some(split) = self.best_split(&idx, &counts, rng) else {
                nodes[slot] = self.leaf(&counts, idx.len());
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| self.x.get(i, split.feature) <= split.threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf(Vec::new()));
            nodes.push(Node::Leaf(Vec::new()));
            nodes[slot] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right: left + 1,
            };
            stack.push((r, left + 1));
            stack.push((l, left));
        }
        DecisionTree { nodes }
    }
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(p) => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub classes: usize,
    pub features: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Tree `t` draws its bootstrap sample and split candidates from
    /// sub-stream `t`, so the result does not depend on thread scheduling.
    pub fn fit(x: &Matrix, y: &[usize], classes: usize, cfg: &ForestConfig) -> Result<Self> {
        cfg.validate()?;
        if x.rows() != y.len() {
            return Err(Error::shape("forest labels", x.rows(), y.len()));
        }
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::InvalidArgument("forest needs a non-empty training matrix".into()));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
            return Err(Error::LabelOutOfRange { label: bad, classes });
        }
        x.ensure_finite("forest training matrix")?;
        let root = Rng::new(cfg.seed, cfg.stream);
        let n = x.rows();
        let mtry = cfg.features_per_split(x.cols());
        let trees = (0..cfg.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = root.fork(t as u64);
                let sample: Vec<usize> = if cfg.bootstrap {
                    (0..n).map(|_| rng.below(n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut g = Grower {
                    x,
                    y,
                    classes,
                    mtry,
                    min_leaf: cfg.min_leaf,
                    perm: (0..x.cols()).collect(),
                    pairs: Vec::with_capacity(n),
                };
                g.grow(sample, &mut rng)
            })
            .collect();
        Ok(RandomForest {
            classes,
            features: x.cols(),
            trees,
        })
    }

    /// Mean of the per-tree leaf class distributions, summed in tree order.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() == 0 {
            return Err(Error::InvalidArgument("empty test set".into()));
        }
        if x.cols() != self.features {
            return Err(Error::shape("forest test features", self.features, x.cols()));
        }
        x.ensure_finite("forest test matrix")?;
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .into_par_iter()
            .map(|r| {
                let row = x.row(r);
                let mut acc = vec![0.0; self.classes];
                for t in &self.trees {
                    for (a, p) in acc.iter_mut().zip(t.predict_row(row)) {
                        *a += p;
                    }
                }
                let k = self.trees.len() as f64;
                acc.iter_mut().for_each(|a| *a /= k);
                acc
            })
            .collect();
        Matrix::from_rows(&rows)
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}

pub fn rf_fit_predict(
    x_train: &Matrix,
    y_train: &[usize],
    classes: usize,
    x_test: &Matrix,
    cfg: &ForestConfig,
) -> Result<Matrix> {
    if x_test.rows() == 0 {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    RandomForest::fit(x_train, y_train, classes, cfg)?.predict_proba(x_test)
}
