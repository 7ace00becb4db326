//! CSV schemas and loading of the daily market and flow files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibrator::{front_month, select_slice, ChainQuote, MarketDay};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub date: NaiveDate,
    pub vstoxx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FutureRecord {
    pub date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub settlement_price: f64,
}

/// Daily positions, position changes, volumes and order-book statistics per
/// account class (A agency, P proprietary, M market maker).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub date: NaiveDate,
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

impl FlowRecord {
    /// Checks the zero-sum and volume identities.
    pub fn check_identities(&self, tol: f64) -> bool {
        (self.pos_a + self.pos_p + self.pos_m).abs() <= tol
            && (self.pos_change_a + self.pos_change_p + self.pos_change_m).abs() <= tol
            && (self.trad_vol_a + self.trad_vol_p + self.trad_vol_m - self.trad_vol_tot).abs() <= tol
    }
}

pub(crate) fn csv_error(file: &str, e: csv::Error) -> Error {
    csv_error_with_headers(file, e, None)
}

fn csv_error_with_headers(file: &str, e: csv::Error, headers: Option<&csv::StringRecord>) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => {
            let column = err
                .field()
                .and_then(|i| headers.and_then(|h| h.get(i as usize)))
                .map(str::to_owned)
                .or_else(|| err.field().map(|i| format!("#{i}")))
                .unwrap_or_else(|| "?".into());
            Error::Parse {
                file: file.into(),
                line,
                column,
                message: err.kind().to_string(),
            }
        }
        csv::ErrorKind::Io(io) => Error::Io {
            path: file.into(),
            message: io.to_string(),
        },
        _ => Error::Parse {
            file: file.into(),
            line,
            column: "?".into(),
            message: e.to_string(),
        },
    }
}

/// Reads every row of a headered CSV; lines starting with `#` are skipped.
pub fn read_csv<T: DeserializeOwned, R: Read>(input: R, name: &str) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = r.headers().map_err(|e| csv_error(name, e))?.clone();
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row.map_err(|e| csv_error_with_headers(name, e, Some(&headers)))?);
    }
    Ok(out)
}

pub fn read_csv_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::Io {
        path: name.clone(),
        message: e.to_string(),
    })?;
    read_csv(file, &name)
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W, name: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(name, e))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: name.into(),
        message: e.to_string(),
    })
}

/// Locations of the four input files.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPaths {
    pub options: PathBuf,
    pub index: PathBuf,
    pub futures: PathBuf,
    pub flows: PathBuf,
}

impl DataPaths {
    /// Standard file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            options: dir.join("options.csv"),
            index: dir.join("index.csv"),
            futures: dir.join("futures.csv"),
            flows: dir.join("flows.csv"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawData {
    pub options: Vec<ChainQuote>,
    pub index: Vec<IndexRecord>,
    pub futures: Vec<FutureRecord>,
    pub flows: Vec<FlowRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyData {
    pub days: Vec<MarketDay>,
    /// Flow records of the retained days, in date order.
    pub flows: Vec<FlowRecord>,
    pub warnings: Vec<String>,
}

fn unique_by_date<'a, T, F: Fn(&T) -> NaiveDate>(
    rows: &'a [T],
    file: &str,
    date: F,
) -> Result<BTreeMap<NaiveDate, &'a T>> {
    let mut map = BTreeMap::new();
    for r in rows {
        if map.insert(date(r), r).is_some() {
            return Err(Error::DuplicateKey {
                file: file.into(),
                date: date(r),
            });
        }
    }
    Ok(map)
}

pub fn read_raw(paths: &DataPaths) -> Result<RawData> {
    Ok(RawData {
        options: read_csv_file(&paths.options)?,
        index: read_csv_file(&paths.index)?,
        futures: read_csv_file(&paths.futures)?,
        flows: read_csv_file(&paths.flows)?,
    })
}

pub fn load_daily_data(paths: &DataPaths) -> Result<DailyData> {
    join_daily_data(&read_raw(paths)?)
}

/// Joins the sources by date. Days missing from any source, or whose option
/// chain yields no usable slice, are dropped with a warning.
pub fn join_daily_data(raw: &RawData) -> Result<DailyData> {
    let index = unique_by_date(&raw.index, "index.csv", |r| r.date)?;
    let flows = unique_by_date(&raw.flows, "flows.csv", |r| r.date)?;
    let mut warnings = Vec::new();
    let mut warn = |msg: String| {
        log::warn!("{msg}");
        warnings.push(msg);
    };
    if raw.flows.is_empty() {
        warn("flows.csv contains no rows".into());
    }

    let mut chains: BTreeMap<NaiveDate, Vec<ChainQuote>> = BTreeMap::new();
    for q in &raw.options {
        chains.entry(q.date).or_default().push(*q);
    }
    let mut futures: BTreeMap<NaiveDate, Vec<&FutureRecord>> = BTreeMap::new();
    for f in &raw.futures {
        futures.entry(f.date).or_default().push(f);
    }

    let all: BTreeSet<NaiveDate> = chains
        .keys()
        .chain(index.keys())
        .chain(futures.keys())
        .chain(flows.keys())
        .copied()
        .collect();

    let mut days = Vec::new();
    let mut kept_flows = Vec::new();
    for date in all {
        let missing: Vec<&str> = [
            ("options", chains.contains_key(&date)),
            ("index", index.contains_key(&date)),
            ("futures", futures.contains_key(&date)),
            ("flows", flows.contains_key(&date)),
        ]
        .iter()
        .filter(|(_, present)| !present)
        .map(|(n, _)| *n)
        .collect();
        if !missing.is_empty() {
            warn(format!("dropping {date}: missing {}", missing.join(", ")));
            continue;
        }
        let slice = match select_slice(&chains[&date], date) {
            Ok(s) => s,
            Err(e) => {
                warn(format!("dropping {date}: {e}"));
                continue;
            }
        };
        let contracts = &futures[&date];
        let expiries: Vec<NaiveDate> = contracts.iter().map(|f| f.expiry_date).collect();
        let Some(expiry) = front_month(date, &expiries) else {
            warn(format!("dropping {date}: no futures contract beyond the roll date"));
            continue;
        };
        let future = contracts.iter().find(|f| f.expiry_date == expiry).unwrap();
        days.push(MarketDay {
            date,
            slice,
            vstoxx_observed: index[&date].vstoxx,
            future_expiry_date: expiry,
            future_market_price: future.settlement_price,
        });
        kept_flows.push(*flows[&date]);
    }
    Ok(DailyData {
        days,
        flows: kept_flows,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_names_column() {
        let text = "date,vstoxx\n2024-01-02,21.5\n2024-01-03,abc\n";
        let err = read_csv::<IndexRecord, _>(text.as_bytes(), "index.csv").unwrap_err();
        match err {
            Error::Parse { file, line, column, .. } => {
                assert_eq!(file, "index.csv");
                assert_eq!(line, 3);
                assert_eq!(column, "vstoxx");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comment_lines_are_skipped() {
        let text = "# generated\ndate,vstoxx\n2024-01-02,21.5\n";
        let rows: Vec<IndexRecord> = read_csv(text.as_bytes(), "index.csv").unwrap();
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn duplicate_dates_rejected() {
        let d = NaiveDate::from_ymd_opt(2024, 1, 2).unwrap();
        let raw = RawData {
            index: vec![IndexRecord { date: d, vstoxx: 20.0 }, IndexRecord { date: d, vstoxx: 21.0 }],
            ..Default::default()
        };
        assert!(matches!(join_daily_data(&raw), Err(Error::DuplicateKey { .. })));
    }

    #[test]
    fn empty_flows_give_no_days_and_a_warning() {
        let d = NaiveDate::from_ymd_opt(2024, 1, 2).unwrap();
        let raw = RawData {
            index: vec![IndexRecord { date: d, vstoxx: 20.0 }],
            ..Default::default()
        };
        let out = join_daily_data(&raw).unwrap();
        assert!(out.days.is_empty());
        assert!(out.warnings.iter().any(|w| w.contains("flows.csv")));
    }
}
