//! Daily feature rows, correlation analysis, consolidation and splitting.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::FlowRecord;
use crate::calibrator::{DayRecord, MarketDay};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub date: NaiveDate,
    /// Market minus model futures price, the regression target.
    pub diff_price: f64,
    pub market_price: f64,
    pub vstoxx: f64,
    /// Calibration objective of the day.
    pub fit_residual: f64,
    pub days_to_expiry: f64,
    pub pos_a: f64,
    pub pos_p: f64,
    pub pos_m: f64,
    pub pos_change_a: f64,
    pub pos_change_p: f64,
    pub pos_change_m: f64,
    pub trad_vol_a: f64,
    pub trad_vol_p: f64,
    pub trad_vol_m: f64,
    pub trad_vol_tot: f64,
    pub avg_fut_spd: f64,
    pub avg_fut_bid_sz: f64,
    pub avg_fut_ask_sz: f64,
    pub option_pos_a: f64,
    pub option_pos_p: f64,
    pub option_pos_m: f64,
}

/// Every numeric column of [`FeatureRow`], target first.
pub const TABLE_COLUMNS: [&str; 21] = [
    "diff_price",
    "market_price",
    "vstoxx",
    "fit_residual",
    "days_to_expiry",
    "pos_a",
    "pos_p",
    "pos_m",
    "pos_change_a",
    "pos_change_p",
    "pos_change_m",
    "trad_vol_a",
    "trad_vol_p",
    "trad_vol_m",
    "trad_vol_tot",
    "avg_fut_spd",
    "avg_fut_bid_sz",
    "avg_fut_ask_sz",
    "option_pos_a",
    "option_pos_p",
    "option_pos_m",
];

/// Model features after consolidation, in this order. The index level, the
/// option positions and the fit residual are dropped.
pub const FEATURE_COLUMNS: [&str; 15] = [
    "market_price",
    "days_to_expiry",
    "pos_a",
    "pos_p",
    "pos_m",
    "pos_change_a",
    "pos_change_p",
    "pos_change_m",
    "trad_vol_a",
    "trad_vol_p",
    "trad_vol_m",
    "trad_vol_tot",
    "avg_fut_spd",
    "avg_fut_bid_sz",
    "avg_fut_ask_sz",
];

impl FeatureRow {
    /// Values in [`TABLE_COLUMNS`] order.
    pub fn table_values(&self) -> [f64; 21] {
        [
            self.diff_price,
            self.market_price,
            self.vstoxx,
            self.fit_residual,
            self.days_to_expiry,
            self.pos_a,
            self.pos_p,
            self.pos_m,
            self.pos_change_a,
            self.pos_change_p,
            self.pos_change_m,
            self.trad_vol_a,
            self.trad_vol_p,
            self.trad_vol_m,
            self.trad_vol_tot,
            self.avg_fut_spd,
            self.avg_fut_bid_sz,
            self.avg_fut_ask_sz,
            self.option_pos_a,
            self.option_pos_p,
            self.option_pos_m,
        ]
    }

    /// Values in [`FEATURE_COLUMNS`] order.
    pub fn feature_values(&self) -> Vec<f64> {
        let all = self.table_values();
        FEATURE_COLUMNS
            .iter()
            .map(|c| all[TABLE_COLUMNS.iter().position(|t| t == c).unwrap()])
            .collect()
    }
}

/// One entry per market day: the feature row, or the reason it is missing.
pub fn build_feature_table(
    days: &[MarketDay],
    flows: &[FlowRecord],
    records: &[DayRecord],
) -> Vec<(NaiveDate, Result<FeatureRow>)> {
    let calib: BTreeMap<NaiveDate, &DayRecord> = records.iter().map(|r| (r.date, r)).collect();
    let flow: BTreeMap<NaiveDate, &FlowRecord> = flows.iter().map(|f| (f.date, f)).collect();
    days.iter()
        .map(|day| {
            let row = (|| {
                let rec = calib
                    .get(&day.date)
                    .ok_or(Error::MissingCalibration(day.date))?;
                if !rec.is_valid() {
                    return Err(Error::Invalid(format!("calibration failed on {}", day.date)));
                }
                let f = flow
                    .get(&day.date)
                    .ok_or_else(|| Error::Invalid(format!("no flow record for {}", day.date)))?;
                Ok(FeatureRow {
                    date: day.date,
                    diff_price: rec.diff_price,
                    market_price: day.future_market_price,
                    vstoxx: day.vstoxx_observed,
                    fit_residual: rec.objective,
                    days_to_expiry: (day.future_expiry_date - day.date).num_days() as f64,
                    pos_a: f.pos_a,
                    pos_p: f.pos_p,
                    pos_m: f.pos_m,
                    pos_change_a: f.pos_change_a,
                    pos_change_p: f.pos_change_p,
                    pos_change_m: f.pos_change_m,
                    trad_vol_a: f.trad_vol_a,
                    trad_vol_p: f.trad_vol_p,
                    trad_vol_m: f.trad_vol_m,
                    trad_vol_tot: f.trad_vol_tot,
                    avg_fut_spd: f.avg_fut_spd,
                    avg_fut_bid_sz: f.avg_fut_bid_sz,
                    avg_fut_ask_sz: f.avg_fut_ask_sz,
                    option_pos_a: f.option_pos_a,
                    option_pos_p: f.option_pos_p,
                    option_pos_m: f.option_pos_m,
                })
            })();
            (day.date, row)
        })
        .collect()
}

/// Pearson correlations between the columns of a row-major matrix. A
/// constant column correlates 0 with everything else (1 with itself).
pub fn correlation_matrix(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 rows, got {}",
            rows.len()
        )));
    }
    let p = rows[0].len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let centered: Vec<Vec<f64>> = (0..p)
        .map(|j| rows.iter().map(|r| r[j] - mean[j]).collect())
        .collect();
    let norm: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    for (j, s) in norm.iter().enumerate() {
        if *s == 0.0 {
            log::warn!("column {j} is constant; its correlations are set to 0");
        }
    }
    let mut out = vec![vec![0.0; p]; p];
    for i in 0..p {
        out[i][i] = 1.0;
        for j in 0..i {
            let c = if norm[i] == 0.0 || norm[j] == 0.0 {
                0.0
            } else {
                let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                (dot / (norm[i] * norm[j])).clamp(-1.0, 1.0)
            };
            out[i][j] = c;
            out[j][i] = c;
        }
    }
    Ok(out)
}

/// Feature matrix and target ready for the learners.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsolidatedTable {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<String>,
    /// Row-major, one row per day.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl ConsolidatedTable {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            columns: self.columns.clone(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|r| r[j]).collect()
    }
}

pub fn consolidate(rows: &[FeatureRow]) -> ConsolidatedTable {
    ConsolidatedTable {
        dates: rows.iter().map(|r| r.date).collect(),
        columns: FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        x: rows.iter().map(|r| r.feature_values()).collect(),
        y: rows.iter().map(|r| r.diff_price).collect(),
    }
}

/// Random split with `round(n * test_fraction)` test rows; both parts keep
/// the original row order.
pub fn train_test_split(
    table: &ConsolidatedTable,
    test_fraction: f64,
    seed: u64,
) -> Result<(ConsolidatedTable, ConsolidatedTable)> {
    let n = table.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!("split needs at least 10 rows, got {n}")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Invalid(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let n_test = ((n as f64) * test_fraction).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((table.subset(&train), table.subset(&test)))
}
