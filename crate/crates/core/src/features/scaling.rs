//! Column standardization with population statistics.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    /// Population standard deviation (divides by `n`).
    pub std: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    /// Fits on row-major training data. `names` label the columns in errors.
    pub fn fit(rows: &[Vec<T>], names: &[String]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData("cannot standardize zero rows".into()));
        }
        let p = rows[0].len();
        let n = T::lit(rows.len() as f64);
        let mut mean = vec![T::zero(); p];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m = *m + *v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); p];
        for r in rows {
            for j in 0..p {
                let d = r[j] - mean[j];
                var[j] = var[j] + d * d;
            }
        }
        let std: Vec<T> = var.into_iter().map(|v| (v / n).sqrt()).collect();
        for j in 0..p {
            if !(std[j] > T::epsilon() * mean[j].abs()) {
                let name = names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
                return Err(Error::ConstantColumn(name));
            }
        }
        Ok(Self { mean, std })
    }

    pub fn transform(&self, rows: &[Vec<T>]) -> Vec<Vec<T>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(v, (m, s))| (*v - *m) / *s)
                    .collect()
            })
            .collect()
    }

    pub fn inverse_transform(&self, rows: &[Vec<T>]) -> Vec<Vec<T>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(v, (m, s))| *v * *s + *m)
                    .collect()
            })
            .collect()
    }
}
