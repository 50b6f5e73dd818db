use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use skinn::config::KvConfig;
use skinn::eval::{decile_backtest, group_metrics, read_returns_csv, CrossSection, GroupMetrics};
use skinn::inference::{infer_phi, write_report_csv};
use skinn::trainer::{fit_meanvar_weights, MeanVarSpec, TrainingData};

use crate::error::CliError;
use crate::files::{line, open, read_fitted, read_panel, write_file};
use crate::settings::ReprOptions;

pub fn run_infer(mut kv: KvConfig, model: &Path, panel: &Path, alpha: f64, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let opts = ReprOptions::from_kv(&mut kv)?;
    kv.finish()?;
    let m = read_fitted(model)?;
    let repr = opts.build(m.config.repr)?;
    let panel = read_panel(panel)?;
    let data = TrainingData::build(&m.config, &panel)?;
    let report = infer_phi(&m, &repr, &data, alpha)?;
    for p in &report.params {
        println!("{} = {} (se {}) [{}, {}]", p.name, p.estimate, p.std_error, p.lo, p.hi);
    }
    if report.regularized {
        println!("Hessian condition {:.3e}: ridge applied", report.condition);
    }
    Ok(vec![write_file(&out.join("inference.csv"), |w| Ok(write_report_csv(&report, w)?))?])
}

fn write_groups(w: &mut Vec<u8>, groups: &[&GroupMetrics]) {
    line(w, format_args!("group,mean_pct,sd_pct,sharpe"));
    for g in groups {
        let sharpe = g.sharpe.map_or_else(|| "NA".to_string(), |s| s.to_string());
        line(w, format_args!("{},{},{},{}", g.label, g.mean_pct, g.sd_pct, sharpe));
    }
}

fn sample_covariance(days: &[CrossSection]) -> Result<DMatrix<f64>, CliError> {
    let n = days[0].realized.len();
    let t = days.len();
    if t < 2 {
        return Err(CliError::Usage("a sample covariance needs at least two days".into()));
    }
    let mean: Vec<f64> = (0..n).map(|i| days.iter().map(|d| d.realized[i]).sum::<f64>() / t as f64).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        days.iter().map(|d| (d.realized[i] - mean[i]) * (d.realized[j] - mean[j])).sum::<f64>() / (t - 1) as f64
    }))
}

pub fn run_alloc(mut kv: KvConfig, returns: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let meanvar = kv.take_or("meanvar", false)?;
    let eta = kv.take_or("eta", 1.0)?;
    let lower = kv.take_or("lower", 0.0)?;
    let upper = kv.take_or("upper", 1.0)?;
    let covariance = kv.take_or("covariance", "identity".to_string())?;
    let epochs = kv.take_or("epochs", 500usize)?;
    let lr = kv.take_or("lr", 0.05)?;
    kv.finish()?;
    let days = read_returns_csv(open(returns)?).map_err(|e| CliError::from(e).at(returns))?;
    let report = decile_backtest(&days)?;
    let mut groups: Vec<&GroupMetrics> = report.deciles.iter().collect();
    groups.push(&report.spread);
    let mut written = Vec::new();
    let mv;
    if meanvar {
        let n = days[0].assets.len();
        if days.iter().any(|d| d.assets != days[0].assets) {
            return Err(CliError::Usage("mean-variance weights need the same assets every day".into()));
        }
        let sigma = match covariance.as_str() {
            "identity" => DMatrix::identity(n, n),
            "sample" => sample_covariance(&days)?,
            other => return Err(CliError::Usage(format!("unknown covariance {other:?}"))),
        };
        let spec = MeanVarSpec::new(sigma, eta, vec![lower; n], vec![upper; n])?;
        let init = vec![1.0 / n as f64; n];
        let weights = days
            .iter()
            .map(|d| fit_meanvar_weights(&d.predicted, &spec, &init, epochs, lr))
            .collect::<Result<Vec<_>, _>>()?;
        let daily: Vec<f64> = days
            .iter()
            .zip(&weights)
            .map(|(d, w)| w.iter().zip(&d.realized).map(|(a, b)| a * b).sum())
            .collect();
        mv = group_metrics("MV".into(), daily);
        groups.push(&mv);
        written.push(write_file(&out.join("weights.csv"), |w| {
            line(w, format_args!("date,asset,weight"));
            for (d, ws) in days.iter().zip(&weights) {
                for (a, x) in d.assets.iter().zip(ws) {
                    line(w, format_args!("{},{a},{x}", d.date));
                }
            }
            Ok(())
        })?);
    }
    for g in &groups {
        println!("{}: mean={:.4}% sd={:.4}%", g.label, g.mean_pct, g.sd_pct);
    }
    written.insert(
        0,
        write_file(&out.join("deciles.csv"), |w| {
            write_groups(w, &groups);
            Ok(())
        })?,
    );
    Ok(written)
}
