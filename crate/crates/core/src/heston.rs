//! Semi-analytic Heston pricing.
//!
//! Calls are priced with the single-integral Lewis representation
//!
//! ```text
//! C(K) = F - sqrt(F K) / pi * Int_0^inf Re[exp(i u ln(F/K)) phi(u - i/2)] / (u^2 + 1/4) du
//! ```
//!
//! where `phi` is the characteristic function of `ln(S_tau / F)`. The
//! characteristic function uses the branch-continuous form (`g` built from
//! `b - d` over `b + d`) so the complex logarithm never crosses its cut, and
//! `b - d` is evaluated as `-xi^2 (iu + u^2) / (b + d)` so the small vol-of-vol
//! limit is free of cancellation.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::blackscholes::{implied_vol, OptionKind};
use crate::error::{Error, Result};
use crate::quadrature::{self, LobattoConfig};
use crate::real::Real;

/// Lower corners of the calibration box `(kappa, theta, xi, rho, v0)`.
pub const BOX_LOWER: [f64; 5] = [0.01, 0.01, 0.01, -1.0, 0.01];
/// Upper corners of the calibration box `(kappa, theta, xi, rho, v0)`.
pub const BOX_UPPER: [f64; 5] = [20.0, 1.0, 5.0, 1.0, 1.0];
pub const PARAM_NAMES: [&str; 5] = ["kappa", "theta", "xi", "rho", "v0"];

const PRICE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams<T> {
    /// Mean-reversion speed of the variance.
    pub kappa: T,
    /// Long-run variance.
    pub theta: T,
    /// Volatility of variance.
    pub xi: T,
    /// Spot/variance correlation.
    pub rho: T,
    /// Initial variance.
    pub v0: T,
}

impl<T: Real> HestonParams<T> {
    /// Validated constructor. Outside the calibration box is allowed (limits
    /// such as `xi -> 0` are useful for testing); use
    /// [`HestonParams::in_calibration_box`] to enforce the box.
    pub fn new(kappa: T, theta: T, xi: T, rho: T, v0: T) -> Result<Self> {
        let p = Self {
            kappa,
            theta,
            xi,
            rho,
            v0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa > T::zero()
            && self.theta > T::zero()
            && self.xi >= T::zero()
            && self.rho >= -T::one()
            && self.rho <= T::one()
            && self.v0 > T::zero()
            && self.to_array().iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid Heston parameters {self:?}")))
        }
    }

    pub fn in_calibration_box(&self) -> bool {
        self.to_array()
            .iter()
            .zip(BOX_LOWER.iter().zip(BOX_UPPER.iter()))
            .all(|(x, (lo, hi))| *x >= T::lit(*lo) && *x <= T::lit(*hi))
    }

    pub fn to_array(&self) -> [T; 5] {
        [self.kappa, self.theta, self.xi, self.rho, self.v0]
    }

    pub fn from_array(x: [T; 5]) -> Self {
        Self {
            kappa: x[0],
            theta: x[1],
            xi: x[2],
            rho: x[3],
            v0: x[4],
        }
    }

    /// Mean of the variance at `tau`, `theta + (v0 - theta) e^{-kappa tau}`.
    pub fn expected_variance(&self, tau: T) -> T {
        self.theta + (self.v0 - self.theta) * (-self.kappa * tau).exp()
    }

    /// Expected integrated variance over `[0, tau]`.
    pub fn expected_total_variance(&self, tau: T) -> T {
        let kt = self.kappa * tau;
        let decay = if kt > T::lit(1e-8) {
            -(-kt).exp_m1() / self.kappa
        } else {
            tau * (T::one() - kt / T::lit(2.0))
        };
        self.theta * tau + (self.v0 - self.theta) * decay
    }
}

/// `ln(1 + z) / z`, series near zero.
fn log1p_over<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() < T::lit(1e-3) {
        let one = Complex::new(T::one(), T::zero());
        // 1 - z/2 + z^2/3 - z^3/4 + z^4/5
        let c = |x: f64| Complex::new(T::lit(x), T::zero());
        one + z * (c(-0.5) + z * (c(1.0 / 3.0) + z * (c(-0.25) + z * c(0.2))))
    } else {
        (Complex::new(T::one(), T::zero()) + z).ln() / z
    }
}

/// `E[exp(i u ln(S_tau / F))]` under zero drift.
pub fn characteristic_fn<T: Real>(u: Complex<T>, tau: T, p: &HestonParams<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let iu = i * u;
    let xi2 = p.xi * p.xi;
    let q = iu + u * u;
    let b = Complex::new(p.kappa, T::zero()) - iu * (p.rho * p.xi);
    let d = (b * b + q * xi2).sqrt();
    let bd = b + d;
    // (b - d) / xi^2
    let bmd_scaled = -q / bd;
    let g = bmd_scaled * xi2 / bd;
    let e = (-d * tau).exp();
    let one_minus_e = one - e;
    let one_minus_g = one - g;
    let d_coef = bmd_scaled * one_minus_e / (one - g * e);
    // ln((1 - g e) / (1 - g)) / xi^2 = log1p(z) / z * z / xi^2
    let z_scaled = bmd_scaled * one_minus_e / (bd * one_minus_g);
    let z = z_scaled * xi2;
    let log_term = log1p_over(z) * z_scaled;
    let c_coef = (bmd_scaled * tau - log_term * T::lit(2.0)) * (p.kappa * p.theta);
    (c_coef + d_coef * p.v0).exp()
}

#[derive(Debug, Clone, Copy)]
pub struct PricerConfig<T> {
    /// Absolute price tolerance as a fraction of the forward.
    pub rel_tol: T,
    pub max_depth: usize,
}

impl<T: Real> Default for PricerConfig<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(PRICE_TOLERANCE).max(T::lit(64.0) * T::epsilon()),
            max_depth: 30,
        }
    }
}

/// Evaluates the Lewis integral for every strike from one set of
/// characteristic-function nodes. Returns `sqrt(F K)/pi * I(K)` per strike.
fn lewis_terms<T: Real>(
    p: &HestonParams<T>,
    forward: T,
    strikes: &[T],
    tau: T,
    cfg: &PricerConfig<T>,
) -> Result<Vec<T>> {
    if !(forward > T::zero()) || !(tau > T::zero()) {
        return Err(Error::domain(format!(
            "forward and tau must be positive, got F={forward} tau={tau}"
        )));
    }
    if let Some(k) = strikes.iter().find(|k| !(**k > T::zero())) {
        return Err(Error::domain(format!("strike must be positive, got {k}")));
    }
    p.validate()?;

    let half = T::lit(0.5);
    let total_var = p.expected_total_variance(tau).max(T::lit(1e-8));
    let scale = (T::one() / total_var.sqrt()).max(T::one());
    let logs: Vec<T> = strikes.iter().map(|k| (forward / *k).ln()).collect();
    let weights: Vec<T> = strikes
        .iter()
        .map(|k| (forward * *k).sqrt() / T::PI())
        .collect();

    let integrand = |t: T, out: &mut [T]| {
        if t >= T::one() {
            return;
        }
        let one_minus = T::one() - t;
        let u = scale * t / one_minus;
        let jac = scale / (one_minus * one_minus);
        let phi = characteristic_fn(Complex::new(u, -half), tau, p);
        let common = jac / (u * u + T::lit(0.25));
        for ((o, k), w) in out.iter_mut().zip(&logs).zip(&weights) {
            let (s, c) = (u * *k).sin_cos();
            *o = *w * common * (c * phi.re - s * phi.im);
        }
    };
    let qcfg = LobattoConfig {
        abs_tol: cfg.rel_tol * forward,
        max_depth: cfg.max_depth,
        initial_panels: 8,
    };
    quadrature::integrate(integrand, T::zero(), T::one(), strikes.len(), &qcfg)
}

fn within_bounds<T: Real>(value: T, lo: T, hi: T, slack: T) -> Result<T> {
    if value >= lo - slack && value <= hi + slack {
        Ok(value.max(lo).min(hi))
    } else {
        Err(Error::Integration {
            tolerance: slack.as_f64(),
            estimate: if value < lo {
                (lo - value).as_f64()
            } else {
                (value - hi).as_f64()
            },
        })
    }
}

/// Undiscounted Heston prices for several strikes sharing one quadrature.
pub fn heston_prices<T: Real>(
    params: &HestonParams<T>,
    forward: T,
    strikes: &[T],
    tau: T,
    kind: OptionKind,
    cfg: &PricerConfig<T>,
) -> Result<Vec<T>> {
    let terms = lewis_terms(params, forward, strikes, tau, cfg)?;
    let slack = T::lit(10.0) * cfg.rel_tol * forward;
    strikes
        .iter()
        .zip(terms)
        .map(|(&k, term)| {
            let (raw, hi) = match kind {
                OptionKind::Call => (forward - term, forward),
                OptionKind::Put => (k - term, k),
            };
            within_bounds(raw, kind.intrinsic(forward, k), hi, slack)
                .map_err(|e| Error::at_strike(k.as_f64(), e))
        })
        .collect()
}

pub fn heston_call<T: Real>(params: &HestonParams<T>, forward: T, strike: T, tau: T) -> Result<T> {
    heston_prices(
        params,
        forward,
        &[strike],
        tau,
        OptionKind::Call,
        &PricerConfig::default(),
    )
    .map(|v| v[0])
}

pub fn heston_put<T: Real>(params: &HestonParams<T>, forward: T, strike: T, tau: T) -> Result<T> {
    heston_prices(
        params,
        forward,
        &[strike],
        tau,
        OptionKind::Put,
        &PricerConfig::default(),
    )
    .map(|v| v[0])
}

/// Model implied volatilities, inverted from out-of-the-money Heston prices.
pub fn model_smile<T: Real>(
    params: &HestonParams<T>,
    forward: T,
    strikes: &[T],
    tau: T,
) -> Result<Vec<T>> {
    model_smile_with(params, forward, strikes, tau, &PricerConfig::default())
}

pub fn model_smile_with<T: Real>(
    params: &HestonParams<T>,
    forward: T,
    strikes: &[T],
    tau: T,
    cfg: &PricerConfig<T>,
) -> Result<Vec<T>> {
    let terms = lewis_terms(params, forward, strikes, tau, cfg)?;
    strikes
        .iter()
        .zip(terms)
        .map(|(&k, term)| {
            let kind = OptionKind::out_of_the_money(forward, k);
            let price = match kind {
                OptionKind::Call => forward - term,
                OptionKind::Put => k - term,
            };
            implied_vol(price, forward, k, tau, kind).map_err(|e| Error::at_strike(k.as_f64(), e))
        })
        .collect()
}
