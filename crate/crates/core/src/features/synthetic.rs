//! Synthetic market with a planted inventory effect.
//!
//! Heston parameters follow a mean-reverting path in a transformed space
//! (logs for the positive parameters, `atanh` for the correlation). Each
//! trading day gets an option chain priced exactly by the Heston engine, the
//! index level from the same parameters, and futures settlement prices
//!
//! ```text
//! market = model + g + noise,
//! g = c * (tanh(pos_p / P0) - tanh(pos_a / P0)) * market / 20.
//! ```
//!
//! Since `g` depends on the market price itself, the price is solved in
//! closed form as `(model + noise) / (1 - c h / 20)`.

use chrono::{Datelike, Days, Months, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::io::{FlowRecord, FutureRecord, IndexRecord, RawData};
use crate::calibrator::{year_fraction, ChainQuote};
use crate::error::{Error, Result};
use crate::heston::{model_smile, HestonParams};
use crate::vstoxx::{vstoxx_future, vstoxx_index};

/// Position scale inside the `tanh` of the planted effect, in contracts.
pub const P0: f64 = 2_000.0;
/// Stationary standard deviation of the A and P positions, in contracts.
pub const POSITION_STD: f64 = 20_000.0;
/// Daily persistence of the positions.
pub const POSITION_AR: f64 = 0.95;
/// Effect size in index points per unit strength at a market price of 20.
pub const EFFECT_POINTS: f64 = 1.0;
pub const STRIKES_PER_EXPIRY: usize = 13;
const STRIKE_GRID: f64 = 25.0;
const START_SPOT: f64 = 3_500.0;
/// Options are listed this many calendar days ahead.
const OPTION_HORIZON_DAYS: i64 = 730;
const LISTED_FUTURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_days: usize,
    pub seed: u64,
    pub inventory_effect_strength: f64,
    /// Standard deviation of the additive futures noise, index points.
    pub noise_scale: f64,
    /// First calendar day; weekends are skipped.
    pub start: NaiveDate,
}

impl SyntheticConfig {
    pub fn new(n_days: usize, seed: u64) -> Self {
        Self {
            n_days,
            seed,
            inventory_effect_strength: 1.0,
            noise_scale: 0.05,
            start: NaiveDate::from_ymd_opt(2022, 1, 3).unwrap(),
        }
    }
}

/// Generator state that is not observable in the CSV files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTruth {
    pub date: NaiveDate,
    pub params: HestonParams<f64>,
    pub front_expiry: NaiveDate,
    pub front_model_price: f64,
    pub front_effect: f64,
    pub front_noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub raw: RawData,
    pub truth: Vec<SyntheticTruth>,
}

/// The planted effect `g` at a given market price.
pub fn planted_effect(strength: f64, pos_p: f64, pos_a: f64, market_price: f64) -> f64 {
    EFFECT_POINTS * strength * ((pos_p / P0).tanh() - (pos_a / P0).tanh()) * market_price / 20.0
}

fn third_friday(year: i32, month: u32) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, Weekday::Fri, 3).unwrap()
}

fn month_start(d: NaiveDate) -> NaiveDate {
    d.with_day(1).unwrap()
}

/// Quarterly index-option expiries after `date` within the listing horizon.
pub fn option_expiries(date: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut m = month_start(date);
    while (m - date).num_days() <= OPTION_HORIZON_DAYS {
        if m.month() % 3 == 0 {
            let e = third_friday(m.year(), m.month());
            if e > date && (e - date).num_days() <= OPTION_HORIZON_DAYS {
                out.push(e);
            }
        }
        m = m + Months::new(1);
    }
    out
}

/// Volatility futures expiring in the month of `d`: 30 days before the
/// third Friday of the following month.
pub fn future_expiry_in_month(d: NaiveDate) -> NaiveDate {
    let next = month_start(d) + Months::new(1);
    third_friday(next.year(), next.month()) - Days::new(30)
}

/// The first listed volatility futures expiring after `date`.
pub fn future_expiries(date: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut m = month_start(date);
    while out.len() < count {
        let e = future_expiry_in_month(m);
        if e > date {
            out.push(e);
        }
        m = m + Months::new(1);
    }
    out
}

struct ParamPath {
    z: [f64; 5],
    mean: [f64; 5],
    speed: [f64; 5],
    vol: [f64; 5],
}

impl ParamPath {
    fn new() -> Self {
        let mean = [2.5f64.ln(), 0.05f64.ln(), 0.9f64.ln(), (-0.7f64).atanh(), 0.045f64.ln()];
        Self {
            z: mean,
            mean,
            speed: [0.01, 0.01, 0.01, 0.01, 0.03],
            vol: [0.01, 0.01, 0.01, 0.01, 0.08],
        }
    }

    fn params(&self) -> HestonParams<f64> {
        let z = &self.z;
        HestonParams::from_array([
            z[0].exp().clamp(0.1, 15.0),
            z[1].exp().clamp(0.015, 0.5),
            z[2].exp().clamp(0.1, 3.0),
            z[3].tanh().clamp(-0.95, 0.5),
            z[4].exp().clamp(0.012, 0.5),
        ])
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) {
        for i in 0..5 {
            let e: f64 = rng.sample(StandardNormal);
            self.z[i] += self.speed[i] * (self.mean[i] - self.z[i]) + self.vol[i] * e;
        }
    }
}

struct Inventory {
    pos_a: f64,
    pos_p: f64,
    option_a: f64,
    option_p: f64,
}

fn ar_step(x: f64, rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let e: f64 = rng.sample(StandardNormal);
    (POSITION_AR * x + std * (1.0 - POSITION_AR * POSITION_AR).sqrt() * e).round()
}

fn strikes_for(forward: f64, sigma: f64, tau: f64) -> Vec<f64> {
    let width = sigma * tau.sqrt();
    let mut out: Vec<f64> = (0..STRIKES_PER_EXPIRY)
        .map(|j| {
            let x = -3.0 + 4.8 * j as f64 / (STRIKES_PER_EXPIRY - 1) as f64;
            (forward * (x * width).exp() / STRIKE_GRID).round() * STRIKE_GRID
        })
        .collect();
    out.dedup();
    out
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticBundle> {
    if cfg.n_days < 50 {
        return Err(Error::Invalid(format!(
            "synthetic market needs at least 50 days, got {}",
            cfg.n_days
        )));
    }
    if !(cfg.noise_scale >= 0.0) || !cfg.inventory_effect_strength.is_finite() {
        return Err(Error::Invalid("noise scale and effect strength must be finite, noise >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut path = ParamPath::new();
    let mut spot = START_SPOT;
    let mut inv = Inventory {
        pos_a: ar_step(0.0, &mut rng, POSITION_STD / (1.0 - POSITION_AR * POSITION_AR).sqrt()),
        pos_p: ar_step(0.0, &mut rng, POSITION_STD / (1.0 - POSITION_AR * POSITION_AR).sqrt()),
        option_a: 0.0,
        option_p: 0.0,
    };
    let mut raw = RawData::default();
    let mut truth = Vec::with_capacity(cfg.n_days);
    let mut date = cfg.start;

    for day in 0..cfg.n_days {
        while matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            date = date + Days::new(1);
        }
        if day > 0 {
            path.step(&mut rng);
            let v = path.params().v0;
            let e: f64 = rng.sample(StandardNormal);
            spot *= ((v / 252.0).sqrt() * e - v / 504.0).exp();
        }
        let p = path.params();

        for expiry in option_expiries(date) {
            let tau = year_fraction(date, expiry);
            let sigma = (p.expected_total_variance(tau) / tau).sqrt();
            let strikes = strikes_for(spot, sigma, tau);
            let vols = model_smile(&p, spot, &strikes, tau)?;
            raw.options.extend(strikes.iter().zip(vols).map(|(&k, v)| ChainQuote {
                date,
                expiry_date: expiry,
                strike: k,
                implied_vol: v,
                forward: spot,
            }));
        }
        raw.index.push(IndexRecord {
            date,
            vstoxx: vstoxx_index(&p),
        });

        let prev = (inv.pos_a, inv.pos_p, inv.option_a, inv.option_p);
        inv.pos_a = ar_step(inv.pos_a, &mut rng, POSITION_STD);
        inv.pos_p = ar_step(inv.pos_p, &mut rng, POSITION_STD);
        inv.option_a = ar_step(inv.option_a, &mut rng, 3.0 * POSITION_STD);
        inv.option_p = ar_step(inv.option_p, &mut rng, 3.0 * POSITION_STD);
        let h = (inv.pos_p / P0).tanh() - (inv.pos_a / P0).tanh();
        let scale = 1.0 - EFFECT_POINTS * cfg.inventory_effect_strength * h / 20.0;
        if !(scale > 0.0) {
            return Err(Error::Invalid(format!(
                "effect strength {} makes the planted price equation singular",
                cfg.inventory_effect_strength
            )));
        }

        let mut front = None;
        for expiry in future_expiries(date, LISTED_FUTURES) {
            let model = vstoxx_future(&p, year_fraction(date, expiry))?;
            let noise = cfg.noise_scale * rng.sample::<f64, _>(StandardNormal);
            let market = (model + noise) / scale;
            raw.futures.push(FutureRecord {
                date,
                expiry_date: expiry,
                settlement_price: market,
            });
            if front.is_none() && (expiry - date).num_days() > 1 {
                front = Some((expiry, model, market - model - noise, noise));
            }
        }
        let (front_expiry, front_model_price, front_effect, front_noise) = front.unwrap();
        truth.push(SyntheticTruth {
            date,
            params: p,
            front_expiry,
            front_model_price,
            front_effect,
            front_noise,
        });

        let change_a = inv.pos_a - prev.0;
        let change_p = inv.pos_p - prev.1;
        let change_m = -change_a - change_p;
        let vol = |change: f64, rng: &mut ChaCha8Rng| change.abs() + rng.random_range(500..5_000) as f64;
        let trad_vol_a = vol(change_a, &mut rng);
        let trad_vol_p = vol(change_p, &mut rng);
        let trad_vol_m = vol(change_m, &mut rng);
        raw.flows.push(FlowRecord {
            date,
            pos_a: inv.pos_a,
            pos_p: inv.pos_p,
            pos_m: -inv.pos_a - inv.pos_p,
            pos_change_a: change_a,
            pos_change_p: change_p,
            pos_change_m: change_m,
            trad_vol_a,
            trad_vol_p,
            trad_vol_m,
            trad_vol_tot: trad_vol_a + trad_vol_p + trad_vol_m,
            avg_fut_spd: 0.05 * rng.random_range(1..=4) as f64,
            avg_fut_bid_sz: rng.random_range(50..400) as f64,
            avg_fut_ask_sz: rng.random_range(50..400) as f64,
            option_pos_a: inv.option_a,
            option_pos_p: inv.option_p,
            option_pos_m: -inv.option_a - inv.option_p,
        });
        date = date + Days::new(1);
    }
    Ok(SyntheticBundle { raw, truth })
}
