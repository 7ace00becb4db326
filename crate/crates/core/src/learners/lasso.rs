//! Lasso by cyclic coordinate descent.
//!
//! Minimizes `(2n)^{-1} |y - X b - b0|^2 + alpha |b|_1` with an unpenalized
//! intercept. The problem is solved on centered data, the intercept is
//! recovered from the means. Iteration stops when the duality gap and the
//! KKT violation are both below tolerance.

use serde::{Deserialize, Serialize};

use super::linalg::min_norm_least_squares;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit<T> {
    pub alpha: T,
    pub coefficients: Vec<T>,
    pub intercept: T,
    pub epochs: usize,
    pub gap: T,
}

impl<T: Real> LassoFit<T> {
    pub fn predict(&self, x: &[Vec<T>]) -> Vec<T> {
        x.iter()
            .map(|r| {
                r.iter()
                    .zip(&self.coefficients)
                    .fold(self.intercept, |s, (a, b)| s + *a * *b)
            })
            .collect()
    }

    pub fn l1_norm(&self) -> T {
        self.coefficients.iter().fold(T::zero(), |s, b| s + b.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig<T> {
    pub gap_tol: T,
    pub kkt_tol: T,
    pub max_epochs: usize,
}

impl<T: Real> Default for LassoConfig<T> {
    fn default() -> Self {
        let floor = T::lit(1000.0) * T::epsilon();
        Self {
            gap_tol: T::lit(1e-9).max(floor),
            kkt_tol: T::lit(1e-10).max(floor),
            max_epochs: 1_000_000,
        }
    }
}

/// Centered design in column-major form.
pub(crate) struct Centered<T> {
    pub cols: Vec<Vec<T>>,
    pub y: Vec<T>,
    pub x_mean: Vec<T>,
    pub y_mean: T,
    pub sq_norm: Vec<T>,
}

impl<T: Real> Centered<T> {
    pub fn new(x: &[Vec<T>], y: &[T]) -> Result<Self> {
        let n = x.len();
        if n == 0 || n != y.len() {
            return Err(Error::Invalid(format!(
                "design has {n} rows but the target has {}",
                y.len()
            )));
        }
        let p = x[0].len();
        let nt = T::lit(n as f64);
        let y_mean = y.iter().fold(T::zero(), |s, v| s + *v) / nt;
        let mut cols = Vec::with_capacity(p);
        let mut x_mean = Vec::with_capacity(p);
        let mut sq_norm = Vec::with_capacity(p);
        for j in 0..p {
            let m = x.iter().fold(T::zero(), |s, r| s + r[j]) / nt;
            let c: Vec<T> = x.iter().map(|r| r[j] - m).collect();
            sq_norm.push(c.iter().fold(T::zero(), |s, v| s + *v * *v));
            cols.push(c);
            x_mean.push(m);
        }
        Ok(Self {
            cols,
            y: y.iter().map(|v| *v - y_mean).collect(),
            x_mean,
            y_mean,
            sq_norm,
        })
    }

    fn n(&self) -> T {
        T::lit(self.y.len() as f64)
    }

    fn dot(a: &[T], b: &[T]) -> T {
        a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
    }

    /// `max_j |X_j^T y| / n`, the smallest alpha with an all-zero solution.
    pub fn alpha_max(&self) -> T {
        let n = self.n();
        self.cols
            .iter()
            .fold(T::zero(), |m, c| m.max(Self::dot(c, &self.y).abs() / n))
    }

    fn residual(&self, beta: &[T]) -> Vec<T> {
        let mut r = self.y.clone();
        for (c, b) in self.cols.iter().zip(beta) {
            if *b != T::zero() {
                for (ri, ci) in r.iter_mut().zip(c) {
                    *ri = *ri - *b * *ci;
                }
            }
        }
        r
    }

    fn gap(&self, beta: &[T], r: &[T], alpha: T) -> T {
        let n = self.n();
        let two_n = T::lit(2.0) * n;
        let corr = self
            .cols
            .iter()
            .fold(T::zero(), |m, c| m.max(Self::dot(c, r).abs()));
        let l1 = beta.iter().fold(T::zero(), |s, b| s + b.abs());
        let primal = Self::dot(r, r) / two_n + alpha * l1;
        let scale = if alpha > T::zero() {
            T::one().max(corr / (n * alpha))
        } else {
            return T::infinity();
        };
        let yy = Self::dot(&self.y, &self.y);
        let diff = self
            .y
            .iter()
            .zip(r)
            .fold(T::zero(), |s, (yi, ri)| {
                let d = *yi - *ri / scale;
                s + d * d
            });
        let dual = (yy - diff) / two_n;
        (primal - dual).max(T::zero())
    }

    pub fn kkt_violation(&self, beta: &[T], alpha: T) -> T {
        let r = self.residual(beta);
        self.kkt_from_residual(beta, &r, alpha)
    }

    fn kkt_from_residual(&self, beta: &[T], r: &[T], alpha: T) -> T {
        let n = self.n();
        let mut worst = T::zero();
        for (c, b) in self.cols.iter().zip(beta) {
            let g = Self::dot(c, r) / n;
            let v = if *b != T::zero() {
                (g - alpha * b.signum()).abs()
            } else {
                (g.abs() - alpha).max(T::zero())
            };
            worst = worst.max(v);
        }
        worst
    }

    fn intercept(&self, beta: &[T]) -> T {
        self.x_mean
            .iter()
            .zip(beta)
            .fold(self.y_mean, |s, (m, b)| s - *m * *b)
    }

    pub fn solve(&self, alpha: T, warm: Option<&[T]>, cfg: &LassoConfig<T>) -> Result<LassoFit<T>> {
        if !(alpha >= T::zero()) {
            return Err(Error::Invalid(format!("alpha must be non-negative, got {alpha}")));
        }
        let p = self.cols.len();
        let n = self.n();
        let mut beta: Vec<T> = warm.map_or_else(|| vec![T::zero(); p], |w| w.to_vec());
        let mut r = self.residual(&beta);
        let na = n * alpha;
        let mut epochs = 0;
        let mut gap = T::infinity();
        while epochs < cfg.max_epochs {
            epochs += 1;
            for j in 0..p {
                let norm = self.sq_norm[j];
                if norm == T::zero() {
                    continue;
                }
                let old = beta[j];
                let rho = Self::dot(&self.cols[j], &r) + norm * old;
                let new = if rho > na {
                    (rho - na) / norm
                } else if rho < -na {
                    (rho + na) / norm
                } else {
                    T::zero()
                };
                if new != old {
                    let delta = new - old;
                    for (ri, ci) in r.iter_mut().zip(&self.cols[j]) {
                        *ri = *ri - delta * *ci;
                    }
                    beta[j] = new;
                }
            }
            if epochs % 10 == 0 || epochs == 1 {
                // Refresh the residual to stop rounding drift.
                r = self.residual(&beta);
                let kkt = self.kkt_from_residual(&beta, &r, alpha);
                gap = self.gap(&beta, &r, alpha);
                let gap_ok = alpha == T::zero() || gap <= cfg.gap_tol;
                if kkt <= cfg.kkt_tol && gap_ok {
                    let intercept = self.intercept(&beta);
                    return Ok(LassoFit {
                        alpha,
                        coefficients: beta,
                        intercept,
                        epochs,
                        gap: if alpha == T::zero() { T::zero() } else { gap },
                    });
                }
            }
        }
        let intercept = self.intercept(&beta);
        Err(Error::NonConvergence {
            epochs,
            gap: gap.as_f64(),
            coefficients: beta.iter().map(|b| b.as_f64()).collect(),
            intercept: intercept.as_f64(),
        })
    }
}

pub fn lasso_fit<T: Real>(x: &[Vec<T>], y: &[T], alpha: T) -> Result<LassoFit<T>> {
    Centered::new(x, y)?.solve(alpha, None, &LassoConfig::default())
}

pub fn lasso_fit_with<T: Real>(
    x: &[Vec<T>],
    y: &[T],
    alpha: T,
    warm: Option<&[T]>,
    cfg: &LassoConfig<T>,
) -> Result<LassoFit<T>> {
    Centered::new(x, y)?.solve(alpha, warm, cfg)
}

pub fn alpha_max<T: Real>(x: &[Vec<T>], y: &[T]) -> Result<T> {
    Ok(Centered::new(x, y)?.alpha_max())
}

/// KKT violation of a fit on `(x, y)`: the largest deviation of the
/// least-squares gradient from the subgradient condition.
pub fn kkt_violation<T: Real>(x: &[Vec<T>], y: &[T], fit: &LassoFit<T>) -> Result<T> {
    Ok(Centered::new(x, y)?.kkt_violation(&fit.coefficients, fit.alpha))
}

/// Minimum-norm least squares with intercept, returned as an `alpha = 0` fit.
pub fn ols_fit<T: Real>(x: &[Vec<T>], y: &[T]) -> Result<LassoFit<T>> {
    let c = Centered::new(x, y)?;
    let rows: Vec<Vec<T>> = (0..c.y.len())
        .map(|i| c.cols.iter().map(|col| col[i]).collect())
        .collect();
    let beta = min_norm_least_squares(&rows, &c.y, T::lit(1e-10).max(T::lit(100.0) * T::epsilon()));
    let intercept = c.intercept(&beta);
    Ok(LassoFit {
        alpha: T::zero(),
        coefficients: beta,
        intercept,
        epochs: 0,
        gap: T::zero(),
    })
}

/// `sum |b_alpha| / sum |b_ols|`.
pub fn shrinkage_factor<T: Real>(fit: &LassoFit<T>, ols: &LassoFit<T>) -> Result<T> {
    let denom = ols.l1_norm();
    if !(denom > T::zero()) {
        return Err(Error::UndefinedShrinkage);
    }
    Ok(fit.l1_norm() / denom)
}

/// `n` log-spaced values from `alpha_max` down to `ratio * alpha_max`.
pub fn alpha_grid<T: Real>(alpha_max: T, n: usize, ratio: T) -> Vec<T> {
    if n == 1 {
        return vec![alpha_max];
    }
    let lo = ratio.ln();
    (0..n)
        .map(|i| alpha_max * (lo * T::lit(i as f64 / (n - 1) as f64)).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath<T> {
    /// Decreasing.
    pub alphas: Vec<T>,
    pub fits: Vec<LassoFit<T>>,
    pub shrinkage: Vec<T>,
    pub ols: LassoFit<T>,
}

/// Warm-started path over the standard grid of `n_alphas` values down to
/// `1e-4 * alpha_max`.
pub fn lasso_path<T: Real>(x: &[Vec<T>], y: &[T], n_alphas: usize) -> Result<LassoPath<T>> {
    let c = Centered::new(x, y)?;
    let alphas = alpha_grid(c.alpha_max(), n_alphas, T::lit(1e-4));
    lasso_path_on(x, y, &alphas)
}

pub fn lasso_path_on<T: Real>(x: &[Vec<T>], y: &[T], alphas: &[T]) -> Result<LassoPath<T>> {
    let c = Centered::new(x, y)?;
    let cfg = LassoConfig::default();
    let ols = ols_fit(x, y)?;
    let mut fits: Vec<LassoFit<T>> = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let warm = fits.last().map(|f| f.coefficients.clone());
        fits.push(c.solve(a, warm.as_deref(), &cfg)?);
    }
    let shrinkage = fits
        .iter()
        .map(|f| shrinkage_factor(f, &ols))
        .collect::<Result<Vec<_>>>()?;
    Ok(LassoPath {
        alphas: alphas.to_vec(),
        fits,
        shrinkage,
        ols,
    })
}
