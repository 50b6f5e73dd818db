use std::io::Write;

use crate::panel::OptionPanel;

use super::hedge::{hedge_error, rmse, OptionModel};
use super::stats::{dm_test, wilcoxon_test};
use super::EvalError;

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodReport {
    pub period: usize,
    pub model: String,
    pub rmse_t1: f64,
    pub rmse_t2: f64,
    pub he_t1: f64,
    pub he_t2: f64,
    pub n_t1: usize,
    pub n_t2: usize,
}

fn pricing_rmse(model: &dyn OptionModel, panel: &OptionPanel) -> Result<f64, EvalError> {
    let xs = panel.quotes.iter().map(|q| q.inputs()).collect::<Result<Vec<_>, _>>()?;
    let mids: Vec<f64> = panel.quotes.iter().map(|q| q.mid).collect();
    rmse(&model.prices(&xs)?, &mids)
}

/// Price RMSE and hedging error of `model` on both test windows.
pub fn evaluate_period(
    period: usize,
    name: &str,
    model: &dyn OptionModel,
    test1: &OptionPanel,
    test2: &OptionPanel,
) -> Result<PeriodReport, EvalError> {
    Ok(PeriodReport {
        period,
        model: name.to_string(),
        rmse_t1: pricing_rmse(model, test1)?,
        rmse_t2: pricing_rmse(model, test2)?,
        he_t1: hedge_error(model, test1)?.he,
        he_t2: hedge_error(model, test2)?.he,
        n_t1: test1.len(),
        n_t2: test2.len(),
    })
}

pub fn write_period_csv<W: Write>(reports: &[PeriodReport], w: W) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["period", "model", "rmse_t1", "rmse_t2", "he_t1", "he_t2", "n_t1", "n_t2"])?;
    for r in reports {
        out.write_record([
            r.period.to_string(),
            r.model.clone(),
            r.rmse_t1.to_string(),
            r.rmse_t2.to_string(),
            r.he_t1.to_string(),
            r.he_t2.to_string(),
            r.n_t1.to_string(),
            r.n_t2.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairwiseTest {
    DieboldMariano,
    Wilcoxon,
}

/// Statistics comparing the column model against the row model; negative
/// values favour the column model.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    pub names: Vec<String>,
    /// `(statistic, p)` with p the significance used for stars; `None` on the
    /// diagonal and where the test is undefined.
    pub cells: Vec<Vec<Option<(f64, f64)>>>,
}

/// Pairwise tests on per-period losses (squared errors).
pub fn pairwise_matrix(names: &[String], losses: &[Vec<f64>], test: PairwiseTest) -> Result<PairwiseMatrix, EvalError> {
    if names.len() != losses.len() {
        return Err(EvalError::Length(names.len(), losses.len()));
    }
    let k = names.len();
    let mut cells = vec![vec![None; k]; k];
    for (row, cells_row) in cells.iter_mut().enumerate() {
        for (col, cell) in cells_row.iter_mut().enumerate() {
            if row == col {
                continue;
            }
            let (ec, er) = (&losses[col], &losses[row]);
            *cell = match test {
                PairwiseTest::DieboldMariano => match dm_test(ec, er) {
                    Ok(r) if !r.degenerate => Some((r.statistic, r.p_value.min(1.0 - r.p_value))),
                    Ok(_) => Some((0.0, 0.5)),
                    Err(EvalError::TooShort { .. }) => None,
                    Err(e) => return Err(e),
                },
                PairwiseTest::Wilcoxon => {
                    if ec.len() != er.len() {
                        return Err(EvalError::Length(ec.len(), er.len()));
                    }
                    let d: Vec<f64> = ec.iter().zip(er).map(|(a, b)| a - b).collect();
                    let w = wilcoxon_test(&d);
                    (!w.degenerate).then_some((w.z, w.p_value))
                }
            };
        }
    }
    Ok(PairwiseMatrix {
        names: names.to_vec(),
        cells,
    })
}

/// `***`, `**` and `*` at the 1%, 5% and 10% levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

pub fn write_matrix_csv<W: Write>(m: &PairwiseMatrix, w: W) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![String::new()];
    header.extend(m.names.iter().cloned());
    out.write_record(&header)?;
    for (i, row) in m.cells.iter().enumerate() {
        let mut rec = vec![m.names[i].clone()];
        for (j, cell) in row.iter().enumerate() {
            rec.push(match cell {
                Some((s, p)) => format!("{s:.4}{}", stars(*p)),
                None if i == j => String::new(),
                None => "NA".into(),
            });
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
