//! Bagged regression trees.
//!
//! Each tree is a CART regressor grown to pure leaves on a bootstrap sample,
//! considering every feature at every split. A split keeps `x <= t` on the
//! left with `t` the largest left-hand value, so predictions only depend on
//! the order of each feature. Tree `i` draws from ChaCha8 stream `i` of the
//! forest seed; trees are fitted in parallel and stored in index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TREES: usize = 250;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub seed: u64,
    pub bootstrap: bool,
}

impl ForestConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            n_trees: DEFAULT_TREES,
            seed,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    fn fit(x: &[Vec<f64>], y: &[f64], sample: Vec<usize>) -> Self {
        let mut tree = Tree { nodes: Vec::new() };
        let mut stack = vec![(sample, usize::MAX, false)];
        while let Some((idx, parent, is_right)) = stack.pop() {
            let id = tree.nodes.len();
            if parent != usize::MAX {
                if let Node::Split { left, right, .. } = &mut tree.nodes[parent] {
                    if is_right {
                        *right = id;
                    } else {
                        *left = id;
                    }
                }
            }
            match best_split(x, y, &idx) {
                None => {
                    let mean = idx.iter().map(|i| y[*i]).sum::<f64>() / idx.len() as f64;
                    tree.nodes.push(Node::Leaf(mean));
                }
                Some((feature, threshold)) => {
                    tree.nodes.push(Node::Split {
                        feature,
                        threshold,
                        left: 0,
                        right: 0,
                    });
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        idx.into_iter().partition(|i| x[*i][feature] <= threshold);
                    stack.push((r, id, true));
                    stack.push((l, id, false));
                }
            }
        }
        tree
    }
}

/// Variance-reduction split: maximizes `S_L^2 / n_L + S_R^2 / n_R`.
/// Returns `None` for pure nodes and nodes whose rows cannot be separated.
fn best_split(x: &[Vec<f64>], y: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
    let first = y[idx[0]];
    if idx.iter().all(|i| y[*i] == first) {
        return None;
    }
    let n = idx.len() as f64;
    let total: f64 = idx.iter().map(|i| y[*i]).sum();
    let mut best_score = total * total / n;
    let mut best = None;
    let mut order = idx.to_vec();
    for f in 0..x[idx[0]].len() {
        order.sort_by(|a, b| x[*a][f].total_cmp(&x[*b][f]));
        let mut left = 0.0;
        for k in 0..order.len() - 1 {
            left += y[order[k]];
            let (xa, xb) = (x[order[k]][f], x[order[k + 1]][f]);
            if xa == xb {
                continue;
            }
            let nl = (k + 1) as f64;
            let right = total - left;
            let score = left * left / nl + right * right / (n - nl);
            if score > best_score * (1.0 + 1e-14) {
                best_score = score;
                best = Some((f, xa));
            }
        }
    }
    // Any separable impure node admits a strictly improving split, but
    // rounding can hide it; fall back to the first separating cut.
    best.or_else(|| {
        (0..x[idx[0]].len()).find_map(|f| {
            let lo = idx.iter().map(|i| x[*i][f]).fold(f64::INFINITY, f64::min);
            let hi = idx.iter().map(|i| x[*i][f]).fold(f64::NEG_INFINITY, f64::max);
            (lo < hi).then_some((f, lo))
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let k = self.trees.len() as f64;
        x.iter()
            .map(|r| self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / k)
            .collect()
    }
}

pub fn forest_fit(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig) -> Result<ForestModel> {
    let n = y.len();
    if n < 2 || x.len() != n {
        return Err(Error::InsufficientData(format!(
            "forest needs at least 2 rows with matching targets, got {} rows and {n} targets",
            x.len()
        )));
    }
    if cfg.n_trees == 0 {
        return Err(Error::Invalid("forest needs at least one tree".into()));
    }
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let sample = if cfg.bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(t as u64);
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            Tree::fit(x, y, sample)
        })
        .collect();
    Ok(ForestModel {
        config: *cfg,
        n_features: x[0].len(),
        trees,
    })
}
