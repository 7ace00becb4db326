//! Synthetic bundle through loading, calibration and the feature table.

use vstoxx_core::calibrator::{calibrate_global, DayRecord};
use vstoxx_core::features::{
    build_feature_table, consolidate, join_daily_data, read_csv, write_csv, generate_synthetic,
    IndexRecord, SyntheticConfig,
};
use vstoxx_core::vstoxx::vstoxx_future;

#[test]
fn bundle_joins_without_dropping_days() {
    let b = generate_synthetic(&SyntheticConfig::new(60, 3)).unwrap();
    let data = join_daily_data(&b.raw).unwrap();
    assert_eq!(data.days.len(), 60);
    assert!(data.warnings.is_empty(), "{:?}", data.warnings);
    for (day, truth) in data.days.iter().zip(&b.truth) {
        assert_eq!(day.date, truth.date);
        assert_eq!(day.future_expiry_date, truth.front_expiry);
        assert!(day.slice.quotes.len() >= 5);
        let days_out = (day.future_expiry_date - day.date).num_days();
        assert!(days_out > 1 && days_out < 70);
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let b = generate_synthetic(&SyntheticConfig::new(50, 4)).unwrap();
    let mut buf = Vec::new();
    write_csv(&b.raw.index, &mut buf, "index.csv").unwrap();
    let back: Vec<IndexRecord> = read_csv(buf.as_slice(), "index.csv").unwrap();
    assert_eq!(back, b.raw.index);
}

#[test]
fn true_parameters_explain_the_residual() {
    let b = generate_synthetic(&SyntheticConfig::new(80, 5)).unwrap();
    let data = join_daily_data(&b.raw).unwrap();
    let records: Vec<DayRecord> = data
        .days
        .iter()
        .zip(&b.truth)
        .map(|(d, t)| {
            let p = t.params;
            let model = vstoxx_future(&p, d.future_tau()).unwrap();
            DayRecord {
                date: d.date,
                kappa: p.kappa,
                theta: p.theta,
                xi: p.xi,
                rho: p.rho,
                v0: p.v0,
                objective: 0.0,
                model_future: model,
                market_future: d.future_market_price,
                diff_price: d.future_market_price - model,
                converged: true,
            }
        })
        .collect();
    let rows: Vec<_> = build_feature_table(&data.days, &data.flows, &records)
        .into_iter()
        .map(|(_, r)| r.unwrap())
        .collect();
    for (row, t) in rows.iter().zip(&b.truth) {
        assert!((row.diff_price - t.front_effect - t.front_noise).abs() < 1e-9);
    }
    let table = consolidate(&rows);
    assert_eq!(table.len(), 80);
    assert_eq!(table.x[0].len(), table.columns.len());
}

#[test]
fn cold_calibration_reprices_the_future() {
    let b = generate_synthetic(&SyntheticConfig {
        noise_scale: 0.0,
        inventory_effect_strength: 0.0,
        ..SyntheticConfig::new(50, 6)
    })
    .unwrap();
    let data = join_daily_data(&b.raw).unwrap();
    let day = &data.days[10];
    let fit = calibrate_global(&day.slice, day.vstoxx_observed, 1);
    let model = vstoxx_future(&fit.params, day.future_tau()).unwrap();
    let rel = (model - day.future_market_price).abs() / day.future_market_price;
    assert!(rel < 1e-3, "relative error {rel}");
    assert!(fit.converged);
}
