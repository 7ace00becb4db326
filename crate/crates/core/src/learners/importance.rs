//! Permutation importance averaged over independently seeded forests.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{forest_fit, ForestConfig};
use super::metrics::explained_variance;
use crate::error::Result;

pub const DEFAULT_REPEATS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<String>,
    /// Mean drop in held-out explained variance when the feature is permuted.
    pub mean: Vec<f64>,
    /// Population standard deviation over the repeats.
    pub std: Vec<f64>,
    pub n_repeats: usize,
    /// Held-out explained variance of each unpermuted forest.
    pub baseline: Vec<f64>,
}

impl ImportanceReport {
    /// Feature indices by decreasing mean importance.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.mean.len()).collect();
        idx.sort_by(|a, b| self.mean[*b].total_cmp(&self.mean[*a]).then(a.cmp(b)));
        idx
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceConfig {
    pub n_repeats: usize,
    pub n_trees: usize,
    pub base_seed: u64,
}

impl ImportanceConfig {
    pub fn new(base_seed: u64) -> Self {
        Self {
            n_repeats: DEFAULT_REPEATS,
            n_trees: super::forest::DEFAULT_TREES,
            base_seed,
        }
    }
}

/// For each repeat `r`, fits a forest with seed `base_seed + r` on the
/// training data, then permutes each held-out column once (ChaCha8 stream
/// `j` of the same seed) and records the drop in explained variance.
pub fn permutation_importance(
    x_train: &[Vec<f64>],
    y_train: &[f64],
    x_test: &[Vec<f64>],
    y_test: &[f64],
    features: &[String],
    cfg: &ImportanceConfig,
) -> Result<ImportanceReport> {
    let p = features.len();
    let runs = (0..cfg.n_repeats)
        .into_par_iter()
        .map(|r| -> Result<(f64, Vec<f64>)> {
            let seed = cfg.base_seed.wrapping_add(r as u64);
            let forest = forest_fit(
                x_train,
                y_train,
                &ForestConfig {
                    n_trees: cfg.n_trees,
                    seed,
                    bootstrap: true,
                },
            )?;
            let base = explained_variance(y_test, &forest.predict(x_test))?;
            let mut drops = Vec::with_capacity(p);
            for j in 0..p {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64 + 1);
                let mut col: Vec<f64> = x_test.iter().map(|row| row[j]).collect();
                col.shuffle(&mut rng);
                let permuted: Vec<Vec<f64>> = x_test
                    .iter()
                    .zip(&col)
                    .map(|(row, v)| {
                        let mut row = row.clone();
                        row[j] = *v;
                        row
                    })
                    .collect();
                drops.push(base - explained_variance(y_test, &forest.predict(&permuted))?);
            }
            Ok((base, drops))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = runs.len() as f64;
    let mean: Vec<f64> = (0..p).map(|j| runs.iter().map(|r| r.1[j]).sum::<f64>() / k).collect();
    let std: Vec<f64> = (0..p)
        .map(|j| (runs.iter().map(|r| (r.1[j] - mean[j]).powi(2)).sum::<f64>() / k).sqrt())
        .collect();
    Ok(ImportanceReport {
        features: features.to_vec(),
        mean,
        std,
        n_repeats: cfg.n_repeats,
        baseline: runs.iter().map(|r| r.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let y = x.iter().map(|r| 2.0 * r[0].tanh() + r[1] * r[1] * 0.5).collect();
        (x, y)
    }

    #[test]
    fn noise_feature_is_unimportant() {
        let (x, y) = data(200, 1);
        let (xt, yt) = data(100, 2);
        let names: Vec<String> = ["a", "b", "noise"].iter().map(|s| s.to_string()).collect();
        let cfg = ImportanceConfig {
            n_repeats: 8,
            n_trees: 40,
            base_seed: 5,
        };
        let rep = permutation_importance(&x, &y, &xt, &yt, &names, &cfg).unwrap();
        assert_eq!(rep.ranking()[2], 2);
        assert!(rep.mean[2].abs() <= 2.0 * rep.std[2].max(0.01));
        assert!(rep.std.iter().all(|s| s.is_finite()));
        let again = permutation_importance(&x, &y, &xt, &yt, &names, &cfg).unwrap();
        assert_eq!(rep, again);
    }
}
