//! Subcommand implementations. Each returns the text printed on stdout.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vstoxx_core::calibrator::{
    read_calibration_csv, run_timeseries, write_calibration_csv, CalibratorConfig, DayRecord, Weights,
};
use vstoxx_core::features::{
    build_feature_table, consolidate, correlation_matrix, generate_synthetic, load_daily_data,
    train_test_split, DataPaths, FeatureRow, Standardizer, SyntheticConfig, TABLE_COLUMNS,
};
use vstoxx_core::heston::{heston_call, HestonParams};
use vstoxx_core::learners::{
    cross_validate_alpha, explained_variance, forest_fit, lasso_path, permutation_importance,
    ForestConfig, ImportanceConfig,
};
use vstoxx_core::mc::{mc_call, mc_vstoxx_future, McConfig};
use vstoxx_core::vstoxx::vstoxx_future;

use crate::output::{
    create_dir, provenance_line, read_text, write_bytes, write_json, write_records, write_serialized,
    Provenance,
};
use crate::{CliError, OracleKind, RunConfig};

fn num(x: f64) -> String {
    x.to_string()
}

pub fn gen(cfg: &RunConfig) -> Result<String, CliError> {
    if cfg.days < 50 {
        return Err(CliError::Validation(format!(
            "--days must be at least 50, got {}",
            cfg.days
        )));
    }
    let bundle = generate_synthetic(&SyntheticConfig {
        inventory_effect_strength: cfg.effect_strength,
        noise_scale: cfg.noise_scale,
        ..SyntheticConfig::new(cfg.days, cfg.seed)
    })?;
    create_dir(&cfg.out_dir)?;
    let header = provenance_line("gen", cfg);
    let paths = DataPaths::in_dir(&cfg.out_dir);
    write_serialized(&paths.options, &header, &bundle.raw.options)?;
    write_serialized(&paths.index, &header, &bundle.raw.index)?;
    write_serialized(&paths.futures, &header, &bundle.raw.futures)?;
    write_serialized(&paths.flows, &header, &bundle.raw.flows)?;
    Ok(format!(
        "wrote {} days ({} option quotes) to {}\n",
        bundle.raw.index.len(),
        bundle.raw.options.len(),
        cfg.out_dir.display()
    ))
}

pub fn calibrate(cfg: &RunConfig) -> Result<String, CliError> {
    let data = load_daily_data(&DataPaths::in_dir(&cfg.data_dir))?;
    if data.days.is_empty() {
        return Err(CliError::Data(format!(
            "no usable market days in {}",
            cfg.data_dir.display()
        )));
    }
    let ccfg = CalibratorConfig {
        weights: Weights {
            sigma: cfg.w_sigma,
            index: cfg.w_idx,
        },
        population: cfg.de_population,
        max_generations: cfg.de_generations,
        ..CalibratorConfig::default()
    };
    let records = run_timeseries(&data.days, cfg.seed, &ccfg);
    create_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("calibration.csv");
    let mut buf = provenance_line("calibrate", cfg).into_bytes();
    write_calibration_csv(&records, &mut buf)?;
    write_bytes(&path, &buf)?;
    let valid = records.iter().filter(|r| r.is_valid()).count();
    let converged = records.iter().filter(|r| r.converged).count();
    Ok(format!(
        "calibrated {} days ({valid} priced, {converged} converged, {} dropped) -> {}\n",
        records.len(),
        data.warnings.len(),
        path.display()
    ))
}

/// Scalar results of `analyze`, written to metrics.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub provenance: Provenance,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_dropped: usize,
    pub best_alpha: f64,
    pub shrinkage: f64,
    pub lasso_train_ev: f64,
    pub lasso_test_ev: f64,
    pub forest_train_ev: f64,
    pub forest_test_ev: f64,
    /// Feature names by decreasing permutation importance.
    pub importance_ranking: Vec<String>,
}

fn feature_rows(cfg: &RunConfig) -> Result<(Vec<FeatureRow>, usize), CliError> {
    let data = load_daily_data(&DataPaths::in_dir(&cfg.data_dir))?;
    let cal_path = cfg.calibration_path();
    let file = std::fs::File::open(&cal_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", cal_path.display())))?;
    let records: Vec<DayRecord> = read_calibration_csv(file, "calibration.csv")?;
    let mut rows = Vec::new();
    let mut dropped = 0;
    for (date, row) in build_feature_table(&data.days, &data.flows, &records) {
        match row {
            Ok(r) => rows.push(r),
            Err(e) => {
                log::warn!("dropping {date}: {e}");
                dropped += 1;
            }
        }
    }
    Ok((rows, dropped))
}

pub fn analyze(cfg: &RunConfig) -> Result<String, CliError> {
    let (rows, n_dropped) = feature_rows(cfg)?;
    create_dir(&cfg.out_dir)?;
    let out = |name: &str| cfg.out_dir.join(name);
    let header = provenance_line("analyze", cfg);

    let table_rows: Vec<Vec<f64>> = rows.iter().map(|r| r.table_values().to_vec()).collect();
    let corr = correlation_matrix(&table_rows)?;
    let mut columns = vec!["column".to_string()];
    columns.extend(TABLE_COLUMNS.iter().map(|c| c.to_string()));
    let corr_rows: Vec<Vec<String>> = corr
        .iter()
        .zip(TABLE_COLUMNS)
        .map(|(r, name)| std::iter::once(name.to_string()).chain(r.iter().map(|v| num(*v))).collect())
        .collect();
    write_records(&out("correlation.csv"), &header, &columns, &corr_rows)?;

    let table = consolidate(&rows);
    let (train, test) = train_test_split(&table, cfg.test_fraction, cfg.seed)?;
    let scaler = Standardizer::fit(&train.x, &train.columns)?;
    let xs_train = scaler.transform(&train.x);
    let xs_test = scaler.transform(&test.x);

    let path = lasso_path(&xs_train, &train.y, cfg.n_alphas)?;
    let mut columns = vec!["alpha".to_string(), "shrinkage".to_string()];
    columns.extend(train.columns.iter().cloned());
    let path_rows: Vec<Vec<String>> = path
        .fits
        .iter()
        .zip(&path.shrinkage)
        .map(|(f, s)| {
            [num(f.alpha), num(*s)]
                .into_iter()
                .chain(f.coefficients.iter().map(|b| num(*b)))
                .collect()
        })
        .collect();
    write_records(&out("lasso_path.csv"), &header, &columns, &path_rows)?;

    let cv = cross_validate_alpha(&xs_train, &train.y, &path.alphas, cfg.folds, cfg.seed)?;
    let mut columns = vec!["alpha".to_string(), "mean_score".to_string(), "selected".to_string()];
    columns.extend((1..=cfg.folds).map(|k| format!("fold_{k}")));
    let cv_rows: Vec<Vec<String>> = (0..cv.alphas.len())
        .map(|i| {
            [num(cv.alphas[i]), num(cv.mean_scores[i]), (i == cv.best_index).to_string()]
                .into_iter()
                .chain(cv.fold_scores.iter().map(|f| num(f[i])))
                .collect()
        })
        .collect();
    write_records(&out("cv_scores.csv"), &header, &columns, &cv_rows)?;

    let lasso = &path.fits[cv.best_index];
    let forest = forest_fit(
        &train.x,
        &train.y,
        &ForestConfig {
            n_trees: cfg.n_trees,
            seed: cfg.seed,
            bootstrap: true,
        },
    )?;
    let lasso_train = lasso.predict(&xs_train);
    let lasso_test = lasso.predict(&xs_test);
    let forest_train = forest.predict(&train.x);
    let forest_test = forest.predict(&test.x);

    let importance = permutation_importance(
        &train.x,
        &train.y,
        &test.x,
        &test.y,
        &train.columns,
        &ImportanceConfig {
            n_repeats: cfg.n_repeats,
            n_trees: cfg.n_trees,
            base_seed: cfg.seed,
        },
    )?;
    let ranking = importance.ranking();
    let imp_rows: Vec<Vec<String>> = ranking
        .iter()
        .map(|&j| vec![importance.features[j].clone(), num(importance.mean[j]), num(importance.std[j])])
        .collect();
    let columns: Vec<String> = ["feature", "mean", "std"].iter().map(|s| s.to_string()).collect();
    write_records(&out("importance.csv"), &header, &columns, &imp_rows)?;

    let mut pred_rows = Vec::with_capacity(table.len());
    for (part, data, yl, yf) in [
        ("train", &train, &lasso_train, &forest_train),
        ("test", &test, &lasso_test, &forest_test),
    ] {
        for i in 0..data.len() {
            pred_rows.push((data.dates[i], part, data.y[i], yl[i], yf[i]));
        }
    }
    pred_rows.sort_by_key(|r| r.0);
    let pred_rows: Vec<Vec<String>> = pred_rows
        .into_iter()
        .map(|(d, part, y, yl, yf)| vec![d.to_string(), part.to_string(), num(y), num(yl), num(yf)])
        .collect();
    let columns: Vec<String> = ["date", "split", "y", "y_hat_lasso", "y_hat_forest"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_records(&out("predictions.csv"), &header, &columns, &pred_rows)?;

    let metrics = Metrics {
        provenance: Provenance::new("analyze", cfg),
        n_rows: table.len(),
        n_train: train.len(),
        n_test: test.len(),
        n_dropped,
        best_alpha: cv.best_alpha,
        shrinkage: path.shrinkage[cv.best_index],
        lasso_train_ev: explained_variance(&train.y, &lasso_train)?,
        lasso_test_ev: explained_variance(&test.y, &lasso_test)?,
        forest_train_ev: explained_variance(&train.y, &forest_train)?,
        forest_test_ev: explained_variance(&test.y, &forest_test)?,
        importance_ranking: ranking.iter().map(|&j| importance.features[j].clone()).collect(),
    };
    write_json(&out("metrics.json"), &metrics)?;
    Ok(format!(
        "{} rows ({} train, {} test): lasso test EV {:.3}, forest test EV {:.3}; top features {}\n",
        metrics.n_rows,
        metrics.n_train,
        metrics.n_test,
        metrics.lasso_test_ev,
        metrics.forest_test_ev,
        metrics.importance_ranking[..3.min(ranking.len())].join(", ")
    ))
}

/// JSON printed by `oracle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub kind: OracleKind,
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub closed_form: f64,
    pub provenance: Provenance,
}

pub fn oracle(cfg: &RunConfig) -> Result<String, CliError> {
    let params = HestonParams::new(cfg.kappa, cfg.theta, cfg.xi, cfg.rho, cfg.v0)?;
    if !(cfg.tau_days > 0.0) {
        return Err(CliError::Validation(format!("tau_days must be positive, got {}", cfg.tau_days)));
    }
    let tau = cfg.tau_days / 365.0;
    let mc = McConfig {
        antithetic: cfg.antithetic,
        ..McConfig::new(cfg.mc_paths, cfg.mc_steps, cfg.seed)
    };
    let (est, closed_form) = match cfg.oracle_kind {
        OracleKind::Future => (mc_vstoxx_future(&params, tau, &mc)?, vstoxx_future(&params, tau)?),
        OracleKind::Call => {
            if !(cfg.forward > 0.0 && cfg.strike > 0.0) {
                return Err(CliError::Validation("forward and strike must be positive".into()));
            }
            (
                mc_call(&params, cfg.forward, cfg.strike, tau, &mc)?,
                heston_call(&params, cfg.forward, cfg.strike, tau)?,
            )
        }
    };
    let out = OracleOutput {
        kind: cfg.oracle_kind,
        value: est.value,
        std_error: est.std_error,
        n_paths: est.n_paths,
        n_steps: est.n_steps,
        seed: est.seed,
        closed_form,
        provenance: Provenance::new("oracle", cfg),
    };
    let mut text = serde_json::to_string_pretty(&out).expect("oracle output serializes");
    text.push('\n');
    Ok(text)
}

fn finite_mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.filter(|x| x.is_finite()).fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn report(cfg: &RunConfig) -> Result<String, CliError> {
    let dir = &cfg.out_dir;
    let mut text = String::new();
    let mut found = false;

    let cal = dir.join("calibration.csv");
    if cal.exists() {
        found = true;
        let file = std::fs::File::open(&cal).map_err(|e| CliError::Data(format!("{}: {e}", cal.display())))?;
        let records = read_calibration_csv(file, "calibration.csv")?;
        let valid: Vec<&DayRecord> = records.iter().filter(|r| r.is_valid()).collect();
        let _ = writeln!(text, "calibration: {} days, {} priced", records.len(), valid.len());
        if let (Some(first), Some(last)) = (records.first(), records.last()) {
            let _ = writeln!(text, "  period            {} .. {}", first.date, last.date);
        }
        let _ = writeln!(
            text,
            "  converged         {}",
            records.iter().filter(|r| r.converged).count()
        );
        let _ = writeln!(
            text,
            "  mean objective    {:.4e}",
            finite_mean(valid.iter().map(|r| r.objective))
        );
        let _ = writeln!(
            text,
            "  mean diff_price   {:+.4}",
            finite_mean(valid.iter().map(|r| r.diff_price))
        );
        let _ = writeln!(
            text,
            "  mean |diff_price| {:.4}",
            finite_mean(valid.iter().map(|r| r.diff_price.abs()))
        );
    }

    let metrics_path = dir.join("metrics.json");
    if metrics_path.exists() {
        found = true;
        let m: Metrics = serde_json::from_str(&read_text(&metrics_path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", metrics_path.display())))?;
        let _ = writeln!(text, "analysis: {} rows ({} train, {} test)", m.n_rows, m.n_train, m.n_test);
        let _ = writeln!(text, "  lasso alpha       {:.4e} (shrinkage {:.3})", m.best_alpha, m.shrinkage);
        let _ = writeln!(
            text,
            "  explained var.    lasso {:.3} / {:.3}, forest {:.3} / {:.3} (train / test)",
            m.lasso_train_ev, m.lasso_test_ev, m.forest_train_ev, m.forest_test_ev
        );
    }

    let imp = dir.join("importance.csv");
    if imp.exists() {
        found = true;
        let _ = writeln!(text, "importance (mean drop in test EV):");
        for (i, line) in importance_lines(&imp)?.iter().take(5).enumerate() {
            let _ = writeln!(text, "  {}. {line}", i + 1);
        }
    }

    if !found {
        return Err(CliError::Data(format!(
            "no calibration.csv, metrics.json or importance.csv in {}",
            dir.display()
        )));
    }
    Ok(text)
}

fn importance_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let mean: f64 = field(1).parse().unwrap_or(f64::NAN);
        let std: f64 = field(2).parse().unwrap_or(f64::NAN);
        out.push(format!("{:16} {mean:.4} ± {std:.4}", field(0)));
    }
    Ok(out)
}
