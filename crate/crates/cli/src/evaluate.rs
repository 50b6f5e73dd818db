use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use skinn::eval::{
    build_schedule, evaluate_period, hedge_error, hedge_error_with, pairwise_matrix, phi_stability, rmse,
    write_matrix_csv, write_period_csv, HedgeSummary, OptionModel, PairwiseTest, PeriodReport, StructuralModel,
};
use skinn::panel::OptionPanel;
use skinn::skr::{Representation, SkInputs};
use skinn::trainer::{FittedModel, TrainingData};

use crate::error::{io_at, CliError};
use crate::files::{line, read_fitted, write_file};

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn inputs(panel: &OptionPanel) -> Result<Vec<SkInputs>, CliError> {
    Ok(panel.quotes.iter().map(|q| q.inputs()).collect::<Result<Vec<_>, _>>()?)
}

/// Mean squared C/K error on the rows the model was trained on.
pub fn data_loss(m: &FittedModel, panel: &OptionPanel) -> Result<f64, CliError> {
    let data = TrainingData::build(&m.config, panel)?;
    let f = m.predict_ratio(data.x.view())?;
    Ok(f.iter().zip(&data.y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / data.y.len() as f64)
}

struct StaticFit {
    name: String,
    n: usize,
    l_data: f64,
    rmse: f64,
    hedge: HedgeSummary,
    daily_mse: Vec<f64>,
}

fn static_fit(path: &Path, panel: &OptionPanel) -> Result<StaticFit, CliError> {
    let m = read_fitted(path)?;
    let prices = OptionModel::prices(&m, &inputs(panel)?)?;
    let mids: Vec<f64> = panel.quotes.iter().map(|q| q.mid).collect();
    let mut by_day: BTreeMap<_, (f64, usize)> = BTreeMap::new();
    for ((q, p), mid) in panel.quotes.iter().zip(&prices).zip(&mids) {
        let e = by_day.entry(q.date).or_default();
        e.0 += (p - mid) * (p - mid);
        e.1 += 1;
    }
    Ok(StaticFit {
        name: stem(path),
        n: panel.len(),
        l_data: data_loss(&m, panel)?,
        rmse: rmse(&prices, &mids)?,
        hedge: hedge_error(&m, panel)?,
        daily_mse: by_day.values().map(|(s, n)| s / *n as f64).collect(),
    })
}

fn write_tests(out: &Path, suffix: &str, names: &[String], losses: &[Vec<f64>]) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for (test, prefix) in [(PairwiseTest::DieboldMariano, "dm"), (PairwiseTest::Wilcoxon, "wilcoxon")] {
        let m = pairwise_matrix(names, losses, test)?;
        written.push(write_file(&out.join(format!("{prefix}{suffix}.csv")), |w| Ok(write_matrix_csv(&m, w)?))?);
    }
    Ok(written)
}

/// Every model on the whole panel; tests compare per-day pricing MSE.
pub fn run_static(models: &[PathBuf], panel_path: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let panel = crate::files::read_panel(panel_path)?;
    let fits = models.par_iter().map(|p| static_fit(p, &panel)).collect::<Result<Vec<_>, _>>()?;
    let mut written = vec![write_file(&out.join("fit.csv"), |w| {
        line(w, format_args!("model,n,l_data,rmse,he,days_hedged"));
        for f in &fits {
            line(w, format_args!("{},{},{},{},{},{}", f.name, f.n, f.l_data, f.rmse, f.hedge.he, f.hedge.days_used));
        }
        Ok(())
    })?];
    let names: Vec<String> = fits.iter().map(|f| f.name.clone()).collect();
    let losses: Vec<Vec<f64>> = fits.iter().map(|f| f.daily_mse.clone()).collect();
    written.extend(write_tests(out, "", &names, &losses)?);
    for f in &fits {
        println!("{}: rmse={} he={} l_data={}", f.name, f.rmse, f.hedge.he, f.l_data);
    }
    Ok(written)
}

fn period_files(dir: &Path) -> Result<BTreeMap<usize, PathBuf>, CliError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_at(dir))? {
        let path = entry.map_err(io_at(dir))?.path();
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if let Some(k) = name.strip_prefix("period_").and_then(|s| s.strip_suffix(".skinn")) {
            if let Ok(k) = k.parse() {
                out.insert(k, path);
            }
        }
    }
    Ok(out)
}

/// Rolling evaluation of `<models>/<name>/period_NNNN.skinn` over the panel's schedule.
pub fn run_rolling(models_dir: &Path, panel_path: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let panel = crate::files::read_panel(panel_path)?;
    let periods = build_schedule(&panel.dates())?;
    let mut dirs: Vec<PathBuf> = fs::read_dir(models_dir)
        .map_err(io_at(models_dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_at(models_dir)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let models: Vec<(String, BTreeMap<usize, PathBuf>)> = dirs
        .iter()
        .map(|d| Ok((d.file_name().unwrap_or_default().to_string_lossy().into_owned(), period_files(d)?)))
        .collect::<Result<Vec<_>, CliError>>()?
        .into_iter()
        .filter(|(_, files)| !files.is_empty())
        .collect();
    if models.is_empty() {
        return Err(CliError::Usage(format!("no period_NNNN.skinn files under {}", models_dir.display())));
    }
    let common: Vec<_> = periods
        .iter()
        .filter(|p| models.iter().all(|(_, files)| files.contains_key(&p.index)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..common.len()).flat_map(|i| (0..models.len()).map(move |j| (i, j))).collect();
    let results = jobs
        .par_iter()
        .map(|&(i, j)| {
            let p = common[i];
            let (name, files) = &models[j];
            let m = read_fitted(&files[&p.index])?;
            let r = evaluate_period(p.index, name, &m, &p.test1.select(&panel), &p.test2.select(&panel))?;
            Ok((r, m.phi))
        })
        .collect::<Result<Vec<(PeriodReport, Vec<f64>)>, CliError>>()?;
    let reports: Vec<PeriodReport> = results.iter().map(|r| r.0.clone()).collect();
    let mut written = vec![write_file(&out.join("periods.csv"), |w| Ok(write_period_csv(&reports, w)?))?];
    let names: Vec<String> = models.iter().map(|m| m.0.clone()).collect();
    let series = |j: usize, f: fn(&PeriodReport) -> f64| -> Vec<f64> {
        results.iter().filter(|r| r.0.model == names[j]).map(|r| f(&r.0)).collect()
    };
    let metrics: [(&str, fn(&PeriodReport) -> f64); 4] = [
        ("_price_t1", |r| r.rmse_t1 * r.rmse_t1),
        ("_price_t2", |r| r.rmse_t2 * r.rmse_t2),
        ("_hedge_t1", |r| r.he_t1 * r.he_t1),
        ("_hedge_t2", |r| r.he_t2 * r.he_t2),
    ];
    for (suffix, f) in metrics {
        let losses: Vec<Vec<f64>> = (0..names.len()).map(|j| series(j, f)).collect();
        written.extend(write_tests(out, suffix, &names, &losses)?);
    }
    written.push(write_file(&out.join("stability.csv"), |w| {
        line(w, format_args!("model,period,phi_step"));
        for name in &names {
            let phis: Vec<Vec<f64>> = results.iter().filter(|r| &r.0.model == name).map(|r| r.1.clone()).collect();
            if phis.len() < 2 || phis[0].is_empty() {
                continue;
            }
            for (k, step) in phi_stability(&phis)?.iter().enumerate() {
                line(w, format_args!("{name},{},{step}", common[k + 1].index));
            }
        }
        Ok(())
    })?);
    println!("evaluated {} models over {} periods", names.len(), common.len());
    Ok(written)
}

pub fn run_hedge(model: &Path, panel_path: &Path, bsm_sigma: Option<f64>, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let panel = crate::files::read_panel(panel_path)?;
    let m = read_fitted(model)?;
    let mut rows = vec![(stem(model), hedge_error(&m, &panel)?)];
    if let Some(sigma) = bsm_sigma {
        let bsm = StructuralModel {
            repr: Representation::Bsm,
            phi: vec![sigma],
        };
        rows.push((format!("BSM({sigma})"), hedge_error(&bsm, &panel)?));
    }
    rows.push(("unhedged".into(), hedge_error_with(&panel, |q| Ok(vec![0.0; q.len()]))?));
    for (name, s) in &rows {
        println!("{name}: he={} days={}", s.he, s.days_used);
    }
    Ok(vec![write_file(&out.join("hedge.csv"), |w| {
        line(w, format_args!("model,he,days_used,days_skipped,positions"));
        for (name, s) in &rows {
            line(w, format_args!("{name},{},{},{},{}", s.he, s.days_used, s.days_skipped, s.positions));
        }
        Ok(())
    })?])
}
