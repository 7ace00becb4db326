//! Volatility-index level and futures price under Heston.
//!
//! The index squares to the expected average variance over a fixed 30-day
//! window, `a v + b`. The future pays `100 sqrt(a v_tau + b)`, whose
//! expectation follows from the CIR Laplace transform `f(phi) = E[e^{phi v_tau}]`
//! and the identity
//!
//! ```text
//! sqrt(x) = 1 / (2 sqrt(pi)) * Int_0^inf s^{-3/2} (1 - e^{-s x}) ds.
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heston::HestonParams;
use crate::real::Real;

/// Index averaging window in years.
pub const WINDOW_YEARS: f64 = 30.0 / 365.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexWindow<T> {
    pub tau_bar: T,
    /// Weight of the current variance.
    pub a: T,
    /// Variance offset contributed by the long-run level.
    pub b: T,
}

impl<T: Real> IndexWindow<T> {
    pub fn new(params: &HestonParams<T>) -> Self {
        let tau_bar = T::lit(WINDOW_YEARS);
        let x = params.kappa * tau_bar;
        let a = if x > T::lit(1e-8) {
            -(-x).exp_m1() / x
        } else {
            T::one() - x / T::lit(2.0)
        };
        Self {
            tau_bar,
            a,
            b: params.theta * (T::one() - a),
        }
    }

    /// Expected window variance given the current instantaneous variance.
    pub fn variance(&self, v: T) -> T {
        self.a * v + self.b
    }
}

/// Index level in points, `100 sqrt(a v0 + b)`.
pub fn vstoxx_index<T: Real>(params: &HestonParams<T>) -> T {
    let w = IndexWindow::new(params);
    T::lit(100.0) * w.variance(params.v0).sqrt()
}

/// Integrand of the futures price at `s > 0`:
/// `s^{-3/2} (1 - f(-s a, tau) e^{-s b})`.
pub fn future_integrand<T: Real>(s: T, params: &HestonParams<T>, tau: T) -> T {
    let w = IndexWindow::new(params);
    integrand_with(s, params, &w, &LaplaceTerms::new(params, tau))
}

/// `s`-independent pieces of `C(phi, tau)` and `D(phi, tau)`.
struct LaplaceTerms<T> {
    /// `(e^{-kappa tau} - 1) / (2 kappa)`, non-positive.
    decay: T,
    /// `e^{-kappa tau}`
    damp: T,
}

impl<T: Real> LaplaceTerms<T> {
    fn new(p: &HestonParams<T>, tau: T) -> Self {
        let kt = p.kappa * tau;
        Self {
            decay: (-kt).exp_m1() / (T::lit(2.0) * p.kappa),
            damp: (-kt).exp(),
        }
    }
}

/// `C(phi) + D(phi) v0`, the log of the CIR Laplace transform at `phi <= 0`.
fn log_laplace<T: Real>(phi: T, p: &HestonParams<T>, lt: &LaplaceTerms<T>) -> T {
    let xi2 = p.xi * p.xi;
    // C = -(2 kappa theta / xi^2) ln(1 + xi^2 phi decay'), with decay' = (e^{-kt}-1)/(2 kappa)
    let y_scaled = phi * lt.decay; // y / xi^2
    let y = y_scaled * xi2;
    let log1p_ratio = if y.abs() < T::lit(1e-8) {
        T::one() - y / T::lit(2.0)
    } else {
        y.ln_1p() / y
    };
    let c = -T::lit(2.0) * p.kappa * p.theta * log1p_ratio * y_scaled;
    // D = 2 kappa phi e^{-kt} / (2 kappa - xi^2 phi (1 - e^{-kt}))
    let two_kappa = T::lit(2.0) * p.kappa;
    let d = two_kappa * phi * lt.damp / (two_kappa - xi2 * phi * (T::one() - lt.damp));
    c + d * p.v0
}

fn integrand_with<T: Real>(
    s: T,
    p: &HestonParams<T>,
    w: &IndexWindow<T>,
    lt: &LaplaceTerms<T>,
) -> T {
    let exponent = log_laplace(-s * w.a, p, lt) - s * w.b;
    -exponent.exp_m1() / (s * s.sqrt())
}

/// Logarithmic integration grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FutureGrid {
    pub lower: f64,
    pub upper: f64,
    pub nodes: usize,
}

impl Default for FutureGrid {
    fn default() -> Self {
        Self {
            lower: 1e-12,
            upper: 1e20,
            nodes: 10_000,
        }
    }
}

/// Futures price in index points on the default grid.
pub fn vstoxx_future<T: Real>(params: &HestonParams<T>, tau: T) -> Result<T> {
    vstoxx_future_with_grid(params, tau, &FutureGrid::default())
}

/// Futures price in index points.
///
/// The trapezoidal rule runs on nodes evenly spaced in `ln s`, integrating
/// `s * integrand(s)` against `d ln s`. The lower node is strictly positive.
pub fn vstoxx_future_with_grid<T: Real>(
    params: &HestonParams<T>,
    tau: T,
    grid: &FutureGrid,
) -> Result<T> {
    params.validate()?;
    if !(tau >= T::zero()) || !tau.is_finite() {
        return Err(Error::domain(format!("tau must be non-negative, got {tau}")));
    }
    if !(grid.lower > 0.0) || !(grid.upper > grid.lower) || grid.nodes < 2 {
        return Err(Error::domain(format!("invalid integration grid {grid:?}")));
    }
    let w = IndexWindow::new(params);
    let lt = LaplaceTerms::new(params, tau);
    let lo = grid.lower.ln();
    let step = (grid.upper.ln() - lo) / (grid.nodes - 1) as f64;
    let mut sum = T::zero();
    for i in 0..grid.nodes {
        let s = T::lit((lo + step * i as f64).exp());
        let value = s * integrand_with(s, params, &w, &lt);
        if !value.is_finite() {
            return Err(Error::NonFinite(s.as_f64()));
        }
        let weight = if i == 0 || i + 1 == grid.nodes {
            T::lit(0.5)
        } else {
            T::one()
        };
        sum = sum + weight * value;
    }
    let integral = sum * T::lit(step);
    Ok(T::lit(100.0) * integral / (T::lit(2.0) * T::PI().sqrt()))
}

/// Upper bound from Jensen's inequality, `100 sqrt(a E[v_tau] + b)`.
pub fn jensen_bound<T: Real>(params: &HestonParams<T>, tau: T) -> T {
    let w = IndexWindow::new(params);
    T::lit(100.0) * w.variance(params.expected_variance(tau)).sqrt()
}
