//! Forward-measure Black pricing with zero rates.
//!
//! Every price in this crate is undiscounted: the forward replaces the spot
//! and there is no carry. The drift `mu` only appears in the vega weight used
//! by the smile objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{norm_cdf, norm_pdf, Real};

const MAX_ITERATIONS: usize = 100;
const PRICE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    /// Out-of-the-money side for a strike: calls at or above the forward.
    pub fn out_of_the_money<T: Real>(forward: T, strike: T) -> Self {
        if strike >= forward {
            OptionKind::Call
        } else {
            OptionKind::Put
        }
    }

    pub fn intrinsic<T: Real>(self, forward: T, strike: T) -> T {
        match self {
            OptionKind::Call => (forward - strike).max(T::zero()),
            OptionKind::Put => (strike - forward).max(T::zero()),
        }
    }
}

/// One market quote after enrichment with price, vega weight and moneyness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote<T> {
    pub strike: T,
    pub implied_vol: T,
    pub price: T,
    pub vega: T,
    pub moneyness: T,
    pub kind: OptionKind,
}

impl<T: Real> OptionQuote<T> {
    /// Builds the out-of-the-money quote for `strike`. The vega weight uses the
    /// quote's own volatility, the moneyness uses `atm_vol`.
    pub fn from_implied_vol(
        forward: T,
        strike: T,
        tau: T,
        implied_vol: T,
        atm_vol: T,
        mu: T,
    ) -> Result<Self> {
        let kind = OptionKind::out_of_the_money(forward, strike);
        Ok(Self {
            strike,
            implied_vol,
            price: black_price(forward, strike, tau, implied_vol, kind)?,
            vega: vega(forward, strike, tau, implied_vol, mu)?,
            moneyness: moneyness(forward, strike, atm_vol, tau)?,
            kind,
        })
    }
}

fn check_positive<T: Real>(name: &str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {x}")))
    }
}

fn check_non_negative<T: Real>(name: &str, x: T) -> Result<()> {
    if x >= T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be non-negative and finite, got {x}")))
    }
}

/// Undiscounted Black price of a European option on a forward.
pub fn black_price<T: Real>(forward: T, strike: T, tau: T, sigma: T, kind: OptionKind) -> Result<T> {
    check_positive("forward", forward)?;
    check_positive("strike", strike)?;
    check_non_negative("tau", tau)?;
    check_non_negative("sigma", sigma)?;
    Ok(black_unchecked(forward, strike, sigma * tau.sqrt(), kind))
}

fn black_unchecked<T: Real>(forward: T, strike: T, total_sd: T, kind: OptionKind) -> T {
    if total_sd <= T::zero() {
        return kind.intrinsic(forward, strike);
    }
    let half = T::lit(0.5);
    let d1 = (forward / strike).ln() / total_sd + half * total_sd;
    let d2 = d1 - total_sd;
    match kind {
        OptionKind::Call => forward * norm_cdf(d1) - strike * norm_cdf(d2),
        OptionKind::Put => strike * norm_cdf(-d2) - forward * norm_cdf(-d1),
    }
}

/// Vega weight `S sqrt(tau) phi(d1)` with drift `mu` inside `d1`.
pub fn vega<T: Real>(spot_or_forward: T, strike: T, tau: T, sigma: T, mu: T) -> Result<T> {
    check_positive("spot", spot_or_forward)?;
    check_positive("strike", strike)?;
    check_positive("tau", tau)?;
    check_positive("sigma", sigma)?;
    let sqrt_tau = tau.sqrt();
    let d1 = ((spot_or_forward / strike).ln() + (mu + sigma * sigma / T::lit(2.0)) * tau)
        / (sigma * sqrt_tau);
    Ok(spot_or_forward * sqrt_tau * norm_pdf(d1))
}

/// Normalized log-moneyness `ln(F/K) / (sigma_atm sqrt(tau))`.
pub fn moneyness<T: Real>(forward: T, strike: T, sigma_atm: T, tau: T) -> Result<T> {
    check_positive("forward", forward)?;
    check_positive("strike", strike)?;
    check_positive("sigma_atm", sigma_atm)?;
    check_positive("tau", tau)?;
    Ok((forward / strike).ln() / (sigma_atm * tau.sqrt()))
}

/// Inverts the Black formula.
///
/// The price is mapped onto the out-of-the-money option through parity and
/// the root is found on the log price with a Newton iteration safeguarded by
/// a bisection bracket, so deep wings with tiny prices invert as accurately as
/// at-the-money quotes.
pub fn implied_vol<T: Real>(price: T, forward: T, strike: T, tau: T, kind: OptionKind) -> Result<T> {
    check_positive("forward", forward)?;
    check_positive("strike", strike)?;
    check_positive("tau", tau)?;
    if !price.is_finite() {
        return Err(Error::NoSolution(format!("price {price} is not finite")));
    }
    let intrinsic = kind.intrinsic(forward, strike);
    let upper = match kind {
        OptionKind::Call => forward,
        OptionKind::Put => strike,
    };
    if price <= intrinsic || price >= upper {
        return Err(Error::NoSolution(format!(
            "price {price} outside ({intrinsic}, {upper}) for {kind:?} F={forward} K={strike}"
        )));
    }

    let otm = OptionKind::out_of_the_money(forward, strike);
    let target = price - intrinsic;
    let otm_upper = match otm {
        OptionKind::Call => forward,
        OptionKind::Put => strike,
    };
    if target <= T::zero() || target >= otm_upper {
        return Err(Error::NoSolution(format!(
            "time value {target} outside bounds for F={forward} K={strike}"
        )));
    }
    let ln_target = target.ln();
    let sqrt_tau = tau.sqrt();
    let k = (forward / strike).ln();
    let price_at = |sd: T| black_unchecked(forward, strike, sd, otm);

    // Work in total standard deviation sd = sigma sqrt(tau).
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut grow = 0;
    while price_at(hi) < target {
        lo = hi;
        hi = hi * T::lit(2.0);
        grow += 1;
        if grow > 60 {
            return Err(Error::NoSolution(format!(
                "no volatility reproduces price {price} for F={forward} K={strike}"
            )));
        }
    }

    let two = T::lit(2.0);
    let brenner = (two * T::PI()).sqrt() * target / forward;
    let mut sd = (two * k.abs()).sqrt().max(brenner);
    if !(sd > lo && sd < hi) {
        sd = (lo + hi) / two;
    }

    let eps = T::epsilon();
    let tolerance = T::lit(PRICE_TOLERANCE).max(T::lit(16.0) * eps) * forward;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let p = price_at(sd);
        if p > target {
            hi = sd;
        } else {
            lo = sd;
        }
        // dC/d(sd) = F phi(d1) in the zero-rate forward convention.
        let d1 = k / sd + sd / two;
        let slope = forward * norm_pdf(d1);
        let residual = if p > T::zero() { p.ln() - ln_target } else { -T::infinity() };
        let mut next = if p > T::zero() && slope > T::zero() && residual.is_finite() {
            sd - residual * p / slope
        } else {
            T::nan()
        };
        if !(next > lo && next < hi) {
            next = (lo + hi) / two;
        }
        let step = (next - sd).abs();
        sd = next;
        if step <= T::lit(4.0) * eps * sd || (hi - lo) <= T::lit(4.0) * eps * hi {
            converged = true;
            break;
        }
    }

    let sigma = sd / sqrt_tau;
    let achieved = (price_at(sd) - target).abs();
    if achieved <= tolerance && (converged || achieved <= tolerance) {
        Ok(sigma)
    } else {
        Err(Error::NoSolution(format!(
            "solver stopped at sigma={sigma} with price error {achieved}"
        )))
    }
}
