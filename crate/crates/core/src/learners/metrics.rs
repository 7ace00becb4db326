use crate::error::{Error, Result};
use crate::real::Real;

fn population_variance<T: Real>(v: impl Iterator<Item = T> + Clone) -> T {
    let n = T::lit(v.clone().count() as f64);
    let mean = v.clone().fold(T::zero(), |a, b| a + b) / n;
    v.fold(T::zero(), |a, b| a + (b - mean) * (b - mean)) / n
}

/// `1 - Var(y - y_hat) / Var(y)`. A constant offset in the prediction does
/// not lower the score.
pub fn explained_variance<T: Real>(y: &[T], y_hat: &[T]) -> Result<T> {
    if y.len() != y_hat.len() {
        return Err(Error::Invalid(format!(
            "length mismatch: {} targets, {} predictions",
            y.len(),
            y_hat.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::InsufficientData("explained variance needs two observations".into()));
    }
    let var_y = population_variance(y.iter().copied());
    if !(var_y > T::zero()) {
        return Err(Error::ConstantColumn("target".into()));
    }
    let var_r = population_variance(y.iter().zip(y_hat).map(|(a, b)| *a - *b));
    Ok(T::one() - var_r / var_y)
}
