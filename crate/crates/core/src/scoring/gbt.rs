//! Gradient-boosted regression trees with squared loss over sparse rows.
//!
//! Trees are grown greedily with exact split search. Only non-zero feature
//! entries are stored per column; the implicit zeros of a node form one
//! group in the split sweep.

use serde::{Deserialize, Serialize};

use crate::tfidf::SparseRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            rounds: 50,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[(usize, f64)]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let x = feature_value(row, *feature);
                    node = if x <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<f64> {
        match self {
            TreeNode::Leaf { value } => vec![*value],
            TreeNode::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }
}

fn feature_value(row: &[(usize, f64)], feature: usize) -> f64 {
    row.binary_search_by_key(&feature, |&(j, _)| j)
        .map(|i| row[i].1)
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtRegressor {
    pub base: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub seed: u64,
    pub trees: Vec<TreeNode>,
}

impl GbtRegressor {
    pub fn predict(&self, row: &[(usize, f64)]) -> f64 {
        self.base
            + self
                .trees
                .iter()
                .map(|t| self.learning_rate * t.predict(row))
                .sum::<f64>()
    }

    /// Fits `config.rounds` trees to the residuals of `targets`.
    /// Also returns training MSE before the first round and after each round.
    pub fn fit(rows: &[SparseRow], dim: usize, targets: &[f64], config: &GbtConfig) -> (Self, Vec<f64>) {
        assert_eq!(rows.len(), targets.len());
        assert!(!rows.is_empty());
        let n = rows.len();
        let base = targets.iter().sum::<f64>() / n as f64;
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                if v != 0.0 {
                    columns[j].push((i, v));
                }
            }
        }
        let mut pred = vec![base; n];
        let mse = |pred: &[f64]| pred.iter().zip(targets).map(|(p, y)| (y - p) * (y - p)).sum::<f64>() / n as f64;
        let mut history = vec![mse(&pred)];
        let mut trees = Vec::with_capacity(config.rounds);
        let mut builder = TreeBuilder {
            columns: &columns,
            in_node: vec![false; n],
            residuals: vec![0.0; n],
            max_depth: config.max_depth,
            min_leaf: config.min_samples_leaf.max(1),
        };
        for _ in 0..config.rounds {
            for i in 0..n {
                builder.residuals[i] = targets[i] - pred[i];
            }
            let all: Vec<usize> = (0..n).collect();
            let tree = builder.grow(&all, 0);
            for (i, row) in rows.iter().enumerate() {
                pred[i] += config.learning_rate * tree.predict(row);
            }
            history.push(mse(&pred));
            trees.push(tree);
        }
        (
            GbtRegressor {
                base,
                learning_rate: config.learning_rate,
                max_depth: config.max_depth,
                seed: config.seed,
                trees,
            },
            history,
        )
    }
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<(usize, f64)>],
    in_node: Vec<bool>,
    residuals: Vec<f64>,
    max_depth: usize,
    min_leaf: usize,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, samples: &[usize], depth: usize) -> TreeNode {
        let n = samples.len();
        let sum: f64 = samples.iter().map(|&i| self.residuals[i]).sum();
        let leaf = TreeNode::Leaf { value: sum / n as f64 };
        if depth >= self.max_depth || n < 2 * self.min_leaf {
            return leaf;
        }
        let Some(best) = self.best_split(samples, sum) else {
            return leaf;
        };
        let lookup = &self.columns[best.feature];
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &i in samples {
            self.in_node[i] = true;
        }
        let mut nonzero: Vec<(usize, f64)> = lookup.iter().filter(|(i, _)| self.in_node[*i]).copied().collect();
        for &i in samples {
            self.in_node[i] = false;
        }
        nonzero.sort_unstable_by_key(|&(i, _)| i);
        for &i in samples {
            let x = nonzero
                .binary_search_by_key(&i, |&(s, _)| s)
                .map(|k| nonzero[k].1)
                .unwrap_or(0.0);
            if x <= best.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.grow(&left, depth + 1)),
            right: Box::new(self.grow(&right, depth + 1)),
        }
    }

    fn best_split(&mut self, samples: &[usize], total: f64) -> Option<BestSplit> {
        let n = samples.len();
        for &i in samples {
            self.in_node[i] = true;
        }
        let parent = total * total / n as f64;
        let mut best: Option<BestSplit> = None;
        let mut groups: Vec<(f64, f64, usize)> = Vec::new();
        for (feature, column) in self.columns.iter().enumerate() {
            let mut entries: Vec<(f64, f64)> = column
                .iter()
                .filter(|(i, _)| self.in_node[*i])
                .map(|&(i, v)| (v, self.residuals[i]))
                .collect();
            if entries.is_empty() {
                continue;
            }
            let zeros = n - entries.len();
            let zero_sum = total - entries.iter().map(|e| e.1).sum::<f64>();
            entries.sort_by(|a, b| a.0.total_cmp(&b.0));

            // (value, residual sum, count) per distinct value, zeros merged in
            groups.clear();
            let mut zero_pending = zeros > 0;
            for &(v, r) in &entries {
                if zero_pending && v > 0.0 {
                    groups.push((0.0, zero_sum, zeros));
                    zero_pending = false;
                }
                match groups.last_mut() {
                    Some(g) if g.0 == v => {
                        g.1 += r;
                        g.2 += 1;
                    }
                    _ => groups.push((v, r, 1)),
                }
            }
            if zero_pending {
                groups.push((0.0, zero_sum, zeros));
            }

            let (mut ls, mut ln) = (0.0, 0usize);
            for g in 0..groups.len().saturating_sub(1) {
                ls += groups[g].1;
                ln += groups[g].2;
                let rn = n - ln;
                if ln < self.min_leaf || rn < self.min_leaf {
                    continue;
                }
                let rs = total - ls;
                let gain = ls * ls / ln as f64 + rs * rs / rn as f64 - parent;
                if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(BestSplit {
                        gain,
                        feature,
                        threshold: 0.5 * (groups[g].0 + groups[g + 1].0),
                    });
                }
            }
        }
        for &i in samples {
            self.in_node[i] = false;
        }
        best
    }
}
