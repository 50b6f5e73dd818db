use std::collections::BTreeMap;
use std::io::Read;

use super::EvalError;

/// Predicted and realised returns of every asset on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub date: String,
    pub assets: Vec<String>,
    pub predicted: Vec<f64>,
    pub realized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    pub label: String,
    /// Annualised mean return in percent.
    pub mean_pct: f64,
    /// Annualised standard deviation in percent.
    pub sd_pct: f64,
    /// `None` when the standard deviation is zero or undefined.
    pub sharpe: Option<f64>,
    pub daily: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecileReport {
    /// Deciles from the highest predictions (H) to the lowest (L).
    pub deciles: Vec<GroupMetrics>,
    /// Long H, short L.
    pub spread: GroupMetrics,
}

/// Annualised (×252) mean, SD and Sharpe ratio of a daily return series.
pub fn group_metrics(label: String, daily: Vec<f64>) -> GroupMetrics {
    let n = daily.len() as f64;
    let mean = daily.iter().sum::<f64>() / n;
    let sd = if daily.len() > 1 {
        (daily.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    let sharpe = (sd > 0.0).then(|| mean * 252.0 / (sd * 252f64.sqrt()));
    GroupMetrics {
        label,
        mean_pct: mean * 252.0 * 100.0,
        sd_pct: sd * 252f64.sqrt() * 100.0,
        sharpe,
        daily,
    }
}

/// Each day, assets are ranked by prediction (descending) and rank i of n
/// goes to decile ⌊10i/n⌋; a decile's daily return is the equal-weighted
/// mean of its realised returns.
pub fn decile_backtest(days: &[CrossSection]) -> Result<DecileReport, EvalError> {
    if days.is_empty() {
        return Err(EvalError::TooShort {
            what: "decile backtest",
            need: 1,
            got: 0,
        });
    }
    let n = days[0].predicted.len();
    let mut series = vec![Vec::with_capacity(days.len()); 10];
    for (i, day) in days.iter().enumerate() {
        if day.predicted.len() < 10 {
            return Err(EvalError::TooShort {
                what: "decile backtest",
                need: 10,
                got: day.predicted.len(),
            });
        }
        if day.predicted.len() != n || day.realized.len() != n {
            return Err(EvalError::Dimension {
                index: i,
                expected: n,
                got: day.predicted.len().min(day.realized.len()),
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| day.predicted[b].total_cmp(&day.predicted[a]));
        let mut sums = [0.0; 10];
        let mut counts = [0usize; 10];
        for (rank, &a) in order.iter().enumerate() {
            let g = rank * 10 / n;
            sums[g] += day.realized[a];
            counts[g] += 1;
        }
        for g in 0..10 {
            series[g].push(sums[g] / counts[g] as f64);
        }
    }
    let spread: Vec<f64> = series[0].iter().zip(&series[9]).map(|(h, l)| h - l).collect();
    let deciles = series
        .into_iter()
        .enumerate()
        .map(|(g, s)| {
            let label = match g {
                0 => "H".to_string(),
                9 => "L".to_string(),
                _ => format!("D{}", g + 1),
            };
            group_metrics(label, s)
        })
        .collect();
    Ok(DecileReport {
        deciles,
        spread: group_metrics("H-L".into(), spread),
    })
}

/// Reads `date,asset,predicted,realized` rows into per-date cross sections,
/// assets sorted by name.
pub fn read_returns_csv<R: Read>(r: R) -> Result<Vec<CrossSection>, EvalError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| EvalError::Parse {
            line: 1,
            msg: format!("missing column {name:?}"),
        })
    };
    let (cd, ca, cp, cr) = (col("date")?, col("asset")?, col("predicted")?, col("realized")?);
    let mut by_date: BTreeMap<String, BTreeMap<String, (f64, f64)>> = BTreeMap::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        let num = |c: usize| {
            field(c).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| EvalError::Parse {
                line,
                msg: format!("{:?} is not a finite number", field(c)),
            })
        };
        let (p, r) = (num(cp)?, num(cr)?);
        let day = by_date.entry(field(cd).to_string()).or_default();
        if day.insert(field(ca).to_string(), (p, r)).is_some() {
            return Err(EvalError::Parse {
                line,
                msg: format!("duplicate asset {:?} on {}", field(ca), field(cd)),
            });
        }
    }
    Ok(by_date
        .into_iter()
        .map(|(date, assets)| CrossSection {
            date,
            predicted: assets.values().map(|v| v.0).collect(),
            realized: assets.values().map(|v| v.1).collect(),
            assets: assets.into_keys().collect(),
        })
        .collect())
}
