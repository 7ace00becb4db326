//! K-fold selection of the Lasso penalty.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lasso::{Centered, LassoConfig};
use super::metrics::explained_variance;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult<T> {
    pub best_alpha: T,
    pub best_index: usize,
    pub alphas: Vec<T>,
    /// Mean validation explained variance per alpha.
    pub mean_scores: Vec<T>,
    /// `fold_scores[k][i]` is fold `k` at `alphas[i]`.
    pub fold_scores: Vec<Vec<T>>,
}

/// Seeded partition of `0..n` into `k` folds of near-equal size.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

/// Mean explained variance over `k` folds for every alpha in the grid.
/// Returns the best alpha; scores within `1e-12` of the best count as a tie
/// and the largest tied alpha wins.
pub fn cross_validate_alpha<T: Real>(
    x: &[Vec<T>],
    y: &[T],
    alphas: &[T],
    k: usize,
    seed: u64,
) -> Result<CvResult<T>> {
    if alphas.is_empty() {
        return Err(Error::Invalid("alpha grid is empty".into()));
    }
    if k < 2 || y.len() < 2 * k {
        return Err(Error::InsufficientData(format!(
            "{k}-fold validation needs at least {} rows, got {}",
            2 * k,
            y.len()
        )));
    }
    // Warm starts follow the grid from the largest alpha down.
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|a, b| alphas[*b].partial_cmp(&alphas[*a]).unwrap());
    let cfg = LassoConfig::default();
    let folds = kfold_indices(y.len(), k, seed);
    let mut fold_scores = Vec::with_capacity(k);
    for held in &folds {
        let mut is_held = vec![false; y.len()];
        held.iter().for_each(|i| is_held[*i] = true);
        let train: Vec<usize> = (0..y.len()).filter(|i| !is_held[*i]).collect();
        let xt: Vec<Vec<T>> = train.iter().map(|i| x[*i].clone()).collect();
        let yt: Vec<T> = train.iter().map(|i| y[*i]).collect();
        let xv: Vec<Vec<T>> = held.iter().map(|i| x[*i].clone()).collect();
        let yv: Vec<T> = held.iter().map(|i| y[*i]).collect();
        let c = Centered::new(&xt, &yt)?;
        let mut scores = vec![T::zero(); alphas.len()];
        let mut warm: Option<Vec<T>> = None;
        for &i in &order {
            let fit = c.solve(alphas[i], warm.as_deref(), &cfg)?;
            scores[i] = explained_variance(&yv, &fit.predict(&xv))?;
            warm = Some(fit.coefficients);
        }
        fold_scores.push(scores);
    }
    let kt = T::lit(k as f64);
    let mean_scores: Vec<T> = (0..alphas.len())
        .map(|i| fold_scores.iter().fold(T::zero(), |s, f| s + f[i]) / kt)
        .collect();
    let top = mean_scores
        .iter()
        .fold(T::neg_infinity(), |m, s| m.max(*s));
    let tie = T::lit(1e-12);
    let best_index = (0..alphas.len())
        .filter(|i| mean_scores[*i] >= top - tie)
        .max_by(|a, b| alphas[*a].partial_cmp(&alphas[*b]).unwrap())
        .unwrap();
    Ok(CvResult {
        best_alpha: alphas[best_index],
        best_index,
        alphas: alphas.to_vec(),
        mean_scores,
        fold_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::lasso::{alpha_grid, alpha_max};
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn design(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }

    #[test]
    fn folds_partition_rows() {
        let f = kfold_indices(23, 5, 1);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(f.iter().all(|x| x.len() == 4 || x.len() == 5));
    }

    #[test]
    fn noiseless_linear_prefers_smallest_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = design(60, 3, &mut rng);
        let y: Vec<f64> = x.iter().map(|r| r[0] - 2.0 * r[1] + 0.5 * r[2]).collect();
        let grid = alpha_grid(alpha_max(&x, &y).unwrap(), 20, 1e-4);
        let cv = cross_validate_alpha(&x, &y, &grid, 5, 3).unwrap();
        assert_eq!(cv.best_index, 19);
        assert!(cv.mean_scores[19] > 1.0 - 1e-6);
    }

    #[test]
    fn pure_noise_prefers_strong_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = design(80, 4, &mut rng);
        let y: Vec<f64> = (0..80).map(|_| rng.sample(StandardNormal)).collect();
        // Start well above every fold's own alpha_max so the first alphas tie at 0.
        let grid = alpha_grid(10.0 * alpha_max(&x, &y).unwrap(), 20, 1e-5);
        let cv = cross_validate_alpha(&x, &y, &grid, 5, 3).unwrap();
        assert!(cv.mean_scores[cv.best_index] <= 0.05);
        assert!(cv.mean_scores[1].abs() < 1e-12);
        assert!(cv.mean_scores[0].abs() < 1e-12);
        assert!(cv.best_index <= 5);
    }

    #[test]
    // Prediction-optimal alphas admit tiny false positives, so support is
    // judged by magnitude.
    fn sparse_support_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = design(200, 8, &mut rng);
        let y: Vec<f64> = x
            .iter()
            .map(|r| 2.0 * r[1] - 1.5 * r[4] + 0.2 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let grid = alpha_grid(alpha_max(&x, &y).unwrap(), 50, 1e-3);
        let cv = cross_validate_alpha(&x, &y, &grid, 5, 11).unwrap();
        let fit = crate::learners::lasso::lasso_fit(&x, &y, cv.best_alpha).unwrap();
        for (j, b) in fit.coefficients.iter().enumerate() {
            if j == 1 || j == 4 {
                assert!(b.abs() > 1.0);
            } else {
                assert!(b.abs() < 0.05, "coefficient {j} = {b}");
            }
        }
    }
}
