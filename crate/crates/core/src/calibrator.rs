//! Joint calibration of Heston parameters to one smile slice and the index.
//!
//! The objective is `w_sigma * smile_mse + w_idx * index_se`, where the smile
//! error is the vega-weighted mean squared implied-vol error over the slice.
//! A cold start runs differential evolution over the calibration box and
//! polishes the best member with projected L-BFGS; a warm start runs only the
//! local step from the previous day's parameters.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::blackscholes::OptionQuote;
use crate::error::{Error, Result};
use crate::heston::{model_smile, HestonParams, BOX_LOWER, BOX_UPPER};
use crate::optimize::de::{differential_evolution, DeConfig};
use crate::optimize::lbfgsb::{minimize_box, LbfgsConfig};
use crate::vstoxx::{vstoxx_future, vstoxx_index};

pub const W_SIGMA: f64 = 10_000.0;
pub const W_INDEX: f64 = 2.0;
/// Longest option expiry considered for the smile, in calendar days.
pub const MAX_EXPIRY_DAYS: i64 = 300;
pub const MONEYNESS_MIN: f64 = -14.0;
pub const MONEYNESS_MAX: f64 = 5.0;

/// ACT/365 year fraction.
pub fn year_fraction(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / 365.0
}

/// One row of an option chain as delivered in `options.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainQuote {
    pub date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub strike: f64,
    pub implied_vol: f64,
    pub forward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileSlice {
    pub as_of_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub tau: f64,
    pub forward: f64,
    pub quotes: Vec<OptionQuote<f64>>,
}

impl SmileSlice {
    /// Builds an unfiltered slice from parallel strike and vol vectors.
    pub fn from_vols(
        as_of_date: NaiveDate,
        expiry_date: NaiveDate,
        forward: f64,
        strikes: &[f64],
        vols: &[f64],
    ) -> Result<Self> {
        if strikes.is_empty() || strikes.len() != vols.len() {
            return Err(Error::Invalid(format!(
                "need matching non-empty strikes and vols, got {} and {}",
                strikes.len(),
                vols.len()
            )));
        }
        let tau = year_fraction(as_of_date, expiry_date);
        let atm = atm_vol(forward, strikes, vols);
        let quotes = strikes
            .iter()
            .zip(vols)
            .map(|(&k, &v)| OptionQuote::from_implied_vol(forward, k, tau, v, atm, 0.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            as_of_date,
            expiry_date,
            tau,
            forward,
            quotes,
        })
    }

    pub fn strikes(&self) -> Vec<f64> {
        self.quotes.iter().map(|q| q.strike).collect()
    }

    pub fn vols(&self) -> Vec<f64> {
        self.quotes.iter().map(|q| q.implied_vol).collect()
    }
}

/// Implied vol of the strike nearest the forward; ties go to the lower strike.
pub fn atm_vol(forward: f64, strikes: &[f64], vols: &[f64]) -> f64 {
    let mut best = 0;
    for i in 1..strikes.len() {
        let d = (strikes[i] - forward).abs();
        let db = (strikes[best] - forward).abs();
        if d < db || (d == db && strikes[i] < strikes[best]) {
            best = i;
        }
    }
    vols[best]
}

/// Picks the latest expiry within [`MAX_EXPIRY_DAYS`] and keeps the quotes
/// with moneyness in `[MONEYNESS_MIN, MONEYNESS_MAX]`.
pub fn select_slice(chain: &[ChainQuote], as_of: NaiveDate) -> Result<SmileSlice> {
    let today: Vec<&ChainQuote> = chain.iter().filter(|q| q.date == as_of).collect();
    if today.is_empty() {
        return Err(Error::Invalid(format!("option chain has no quotes for {as_of}")));
    }
    let expiry = today
        .iter()
        .map(|q| q.expiry_date)
        .filter(|e| {
            let days = (*e - as_of).num_days();
            days > 0 && days <= MAX_EXPIRY_DAYS
        })
        .max()
        .ok_or(Error::NoExpiry {
            as_of,
            max_days: MAX_EXPIRY_DAYS,
        })?;
    let mut rows: Vec<&ChainQuote> = today.into_iter().filter(|q| q.expiry_date == expiry).collect();
    rows.sort_by(|a, b| a.strike.total_cmp(&b.strike));
    let forward = rows[0].forward;
    let strikes: Vec<f64> = rows.iter().map(|q| q.strike).collect();
    let vols: Vec<f64> = rows.iter().map(|q| q.implied_vol).collect();
    let mut slice = SmileSlice::from_vols(as_of, expiry, forward, &strikes, &vols)?;
    slice
        .quotes
        .retain(|q| q.moneyness >= MONEYNESS_MIN && q.moneyness <= MONEYNESS_MAX);
    if slice.quotes.is_empty() {
        return Err(Error::EmptySlice { as_of, expiry });
    }
    Ok(slice)
}

/// `sum w (a - b)^2 / sum w`.
pub fn weighted_mse(weights: &[f64], market: &[f64], model: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let sse: f64 = weights
        .iter()
        .zip(market.iter().zip(model))
        .map(|(w, (a, b))| w * (a - b) * (a - b))
        .sum();
    sse / total
}

pub fn smile_mse(params: &HestonParams<f64>, slice: &SmileSlice) -> Result<f64> {
    if slice.quotes.is_empty() {
        return Err(Error::Invalid("empty smile slice".into()));
    }
    let model = model_smile(params, slice.forward, &slice.strikes(), slice.tau)?;
    let vegas: Vec<f64> = slice.quotes.iter().map(|q| q.vega).collect();
    Ok(weighted_mse(&vegas, &slice.vols(), &model))
}

pub fn index_se(params: &HestonParams<f64>, observed: f64) -> f64 {
    let d = observed - vstoxx_index(params);
    d * d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub sigma: f64,
    pub index: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            sigma: W_SIGMA,
            index: W_INDEX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    pub objective: f64,
    pub smile_mse: f64,
    pub index_se: f64,
}

pub fn objective_parts(
    params: &HestonParams<f64>,
    slice: &SmileSlice,
    observed: f64,
    weights: &Weights,
) -> Result<ObjectiveParts> {
    let smile = smile_mse(params, slice)?;
    let index = index_se(params, observed);
    Ok(ObjectiveParts {
        objective: weights.sigma * smile + weights.index * index,
        smile_mse: smile,
        index_se: index,
    })
}

/// `10000 * smile_mse + 2 * index_se`.
pub fn combined_objective(params: &HestonParams<f64>, slice: &SmileSlice, observed: f64) -> Result<f64> {
    objective_parts(params, slice, observed, &Weights::default()).map(|p| p.objective)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: HestonParams<f64>,
    pub objective: f64,
    pub smile_mse: f64,
    pub index_se: f64,
    pub converged: bool,
    pub n_evaluations: usize,
    /// Objective at each accepted local iterate, starting point first.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratorConfig {
    pub weights: Weights,
    pub population: usize,
    pub max_generations: usize,
    pub de_tol: f64,
    pub local: LbfgsConfig,
}

impl Default for CalibratorConfig {
    fn default() -> Self {
        let de = DeConfig::for_dimension(5, 0);
        Self {
            weights: Weights::default(),
            population: de.population,
            max_generations: de.max_generations,
            de_tol: de.tol,
            local: LbfgsConfig::default(),
        }
    }
}

fn params_or_none(x: &[f64]) -> Option<HestonParams<f64>> {
    HestonParams::new(x[0], x[1], x[2], x[3], x[4]).ok()
}

fn objective_fn<'a>(
    slice: &'a SmileSlice,
    observed: f64,
    weights: &'a Weights,
) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |x: &[f64]| match params_or_none(x) {
        Some(p) => objective_parts(&p, slice, observed, weights)
            .map(|o| o.objective)
            .unwrap_or(f64::INFINITY),
        None => f64::INFINITY,
    }
}

fn finish(
    x: &[f64],
    slice: &SmileSlice,
    observed: f64,
    weights: &Weights,
    converged: bool,
    n_evaluations: usize,
    trace: Vec<f64>,
) -> CalibrationResult {
    let params = HestonParams::from_array([x[0], x[1], x[2], x[3], x[4]]);
    match objective_parts(&params, slice, observed, weights) {
        Ok(o) => CalibrationResult {
            params,
            objective: o.objective,
            smile_mse: o.smile_mse,
            index_se: o.index_se,
            converged,
            n_evaluations,
            trace,
        },
        Err(_) => CalibrationResult {
            params,
            objective: f64::INFINITY,
            smile_mse: f64::INFINITY,
            index_se: index_se(&params, observed),
            converged: false,
            n_evaluations,
            trace,
        },
    }
}

/// Differential evolution over the box followed by a local polish.
pub fn calibrate_global(slice: &SmileSlice, observed: f64, seed: u64) -> CalibrationResult {
    calibrate_global_with(slice, observed, seed, &CalibratorConfig::default())
}

pub fn calibrate_global_with(
    slice: &SmileSlice,
    observed: f64,
    seed: u64,
    cfg: &CalibratorConfig,
) -> CalibrationResult {
    let f = objective_fn(slice, observed, &cfg.weights);
    let de_cfg = DeConfig {
        population: cfg.population,
        max_generations: cfg.max_generations,
        tol: cfg.de_tol,
        seed,
        ..DeConfig::for_dimension(5, seed)
    };
    let de = differential_evolution(&f, &BOX_LOWER, &BOX_UPPER, &de_cfg);
    let local = minimize_box(&f, &de.x, &BOX_LOWER, &BOX_UPPER, &cfg.local);
    log::debug!(
        "global calibration: DE {} generations, best {:.3e}; polish {} iterations, {:.3e}",
        de.generations,
        de.value,
        local.iterations,
        local.value
    );
    let (x, converged) = if local.value <= de.value {
        (local.x, local.converged)
    } else {
        (de.x, false)
    };
    finish(
        &x,
        slice,
        observed,
        &cfg.weights,
        converged,
        de.evaluations + local.evaluations,
        local.trace,
    )
}

/// Local optimization from the previous day's parameters.
pub fn calibrate_warm(slice: &SmileSlice, observed: f64, prev: &HestonParams<f64>) -> CalibrationResult {
    calibrate_warm_with(slice, observed, prev, &CalibratorConfig::default())
}

pub fn calibrate_warm_with(
    slice: &SmileSlice,
    observed: f64,
    prev: &HestonParams<f64>,
    cfg: &CalibratorConfig,
) -> CalibrationResult {
    let f = objective_fn(slice, observed, &cfg.weights);
    let local = minimize_box(&f, &prev.to_array(), &BOX_LOWER, &BOX_UPPER, &cfg.local);
    finish(
        &local.x,
        slice,
        observed,
        &cfg.weights,
        local.converged,
        local.evaluations,
        local.trace,
    )
}

/// Front-month contract under the roll convention: the earliest expiry at
/// least two calendar days after `date`, so the position rolls to the next
/// contract one day before the front expires.
pub fn front_month(date: NaiveDate, expiries: &[NaiveDate]) -> Option<NaiveDate> {
    expiries
        .iter()
        .copied()
        .filter(|e| (*e - date).num_days() > 1)
        .min()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketDay {
    pub date: NaiveDate,
    pub slice: SmileSlice,
    pub vstoxx_observed: f64,
    pub future_expiry_date: NaiveDate,
    pub future_market_price: f64,
}

impl MarketDay {
    pub fn future_tau(&self) -> f64 {
        year_fraction(self.date, self.future_expiry_date)
    }
}

/// One row of the calibration output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
    pub v0: f64,
    pub objective: f64,
    pub model_future: f64,
    pub market_future: f64,
    pub diff_price: f64,
    pub converged: bool,
}

impl DayRecord {
    pub fn params(&self) -> Option<HestonParams<f64>> {
        HestonParams::new(self.kappa, self.theta, self.xi, self.rho, self.v0).ok()
    }

    pub fn is_valid(&self) -> bool {
        self.diff_price.is_finite() && self.params().is_some()
    }

    fn failed(day: &MarketDay) -> Self {
        Self {
            date: day.date,
            kappa: f64::NAN,
            theta: f64::NAN,
            xi: f64::NAN,
            rho: f64::NAN,
            v0: f64::NAN,
            objective: f64::NAN,
            model_future: f64::NAN,
            market_future: day.future_market_price,
            diff_price: f64::NAN,
            converged: false,
        }
    }
}

fn record(day: &MarketDay, fit: &CalibrationResult) -> DayRecord {
    let p = fit.params;
    match vstoxx_future(&p, day.future_tau()) {
        Ok(model) => DayRecord {
            date: day.date,
            kappa: p.kappa,
            theta: p.theta,
            xi: p.xi,
            rho: p.rho,
            v0: p.v0,
            objective: fit.objective,
            model_future: model,
            market_future: day.future_market_price,
            diff_price: day.future_market_price - model,
            converged: fit.converged,
        },
        Err(e) => {
            log::warn!("{}: futures pricing failed: {e}", day.date);
            DayRecord {
                objective: fit.objective,
                ..DayRecord::failed(day)
            }
        }
    }
}

/// Calibrates every day in order: cold start on the first day (and after a
/// failed day with no usable predecessor), warm start afterwards.
pub fn run_timeseries(days: &[MarketDay], seed: u64, cfg: &CalibratorConfig) -> Vec<DayRecord> {
    let mut prev: Option<HestonParams<f64>> = None;
    let mut out = Vec::with_capacity(days.len());
    for day in days {
        let fit = match &prev {
            Some(p) => calibrate_warm_with(&day.slice, day.vstoxx_observed, p, cfg),
            None => calibrate_global_with(&day.slice, day.vstoxx_observed, seed, cfg),
        };
        let rec = if fit.objective.is_finite() {
            prev = Some(fit.params);
            record(day, &fit)
        } else {
            log::warn!("{}: calibration produced no finite objective", day.date);
            DayRecord::failed(day)
        };
        log::info!(
            "{} objective {:.3e} diff {:+.4}",
            day.date,
            rec.objective,
            rec.diff_price
        );
        out.push(rec);
    }
    out
}

pub fn write_calibration_csv<W: Write>(records: &[DayRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::Io {
            path: "calibration.csv".into(),
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "calibration.csv".into(),
        message: e.to_string(),
    })
}

pub fn read_calibration_csv<R: Read>(input: R, name: &str) -> Result<Vec<DayRecord>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(|e| crate::features::csv_error(name, e)))
        .collect()
}
