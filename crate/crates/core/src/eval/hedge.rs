use std::collections::HashMap;

use crate::autodiff::Tape;
use crate::panel::{OptionPanel, OptionQuote};
use crate::skr::{bsm_delta, Representation, SkInputs, SkVars};
use crate::trainer::FittedModel;

use super::EvalError;

/// √(mean squared difference).
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    if pred.len() != actual.len() {
        return Err(EvalError::Length(pred.len(), actual.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::TooShort {
            what: "rmse",
            need: 1,
            got: 0,
        });
    }
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// A pricing model with a spot Delta.
pub trait OptionModel: Sync {
    fn prices(&self, xs: &[SkInputs]) -> Result<Vec<f64>, EvalError>;
    fn deltas(&self, xs: &[SkInputs]) -> Result<Vec<f64>, EvalError>;
}

impl OptionModel for FittedModel {
    fn prices(&self, xs: &[SkInputs]) -> Result<Vec<f64>, EvalError> {
        Ok(FittedModel::prices(self, xs)?)
    }

    fn deltas(&self, xs: &[SkInputs]) -> Result<Vec<f64>, EvalError> {
        Ok(FittedModel::deltas(self, xs)?)
    }
}

/// A representation with fixed constrained parameters, used as a pricer.
#[derive(Debug, Clone)]
pub struct StructuralModel {
    pub repr: Representation,
    pub phi: Vec<f64>,
}

impl StructuralModel {
    fn price_and_delta(&self, x: &SkInputs, with_delta: bool) -> Result<(f64, f64), EvalError> {
        if let (Representation::Bsm, true) = (&self.repr, with_delta) {
            let tape = Tape::new();
            let p = crate::skr::bsm_price(&x.lift(&tape), tape.constant(self.phi[0]))?.value();
            return Ok((p, bsm_delta(x, self.phi[0])));
        }
        let tape = Tape::new();
        let phi: Vec<_> = self.phi.iter().map(|&p| tape.constant(p)).collect();
        let s = tape.var(x.s)?;
        let xv = SkVars {
            s,
            k: tape.constant(x.k),
            r: tape.constant(x.r),
            tau: tape.constant(x.tau),
        };
        let c = self.repr.pricer(&phi)?.price(&xv)?;
        let d = if with_delta { tape.grad(c, &[s])?[0] } else { 0.0 };
        Ok((c.value(), d))
    }
}

impl OptionModel for StructuralModel {
    fn prices(&self, xs: &[SkInputs]) -> Result<Vec<f64>, EvalError> {
        xs.iter().map(|x| Ok(self.price_and_delta(x, false)?.0)).collect()
    }

    fn deltas(&self, xs: &[SkInputs]) -> Result<Vec<f64>, EvalError> {
        xs.iter().map(|x| Ok(self.price_and_delta(x, true)?.1)).collect()
    }
}

pub fn model_delta(model: &dyn OptionModel, x: &SkInputs) -> Result<f64, EvalError> {
    Ok(model.deltas(std::slice::from_ref(x))?[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeSummary {
    /// Mean over hedged days of |mean next-day portfolio value|.
    pub he: f64,
    pub days_used: usize,
    /// Days with no option quoted again on the next date.
    pub days_skipped: usize,
    pub positions: usize,
}

/// Hedging error with deltas from `deltas(day quotes)`. Each day's book is
/// long Δ shares, short the call, and holds the remainder in the bond; it is
/// revalued on the next quote date of the panel with the bond grown by
/// e^{r/252}.
pub fn hedge_error_with<F>(panel: &OptionPanel, mut deltas: F) -> Result<HedgeSummary, EvalError>
where
    F: FnMut(&[&OptionQuote]) -> Result<Vec<f64>, EvalError>,
{
    let days: Vec<(_, Vec<&OptionQuote>)> = panel.by_date().into_iter().collect();
    let mut total = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    let mut positions = 0;
    for w in days.windows(2) {
        let (today, next) = (&w[0].1, &w[1].1);
        let next_by_key: HashMap<String, &OptionQuote> = next.iter().map(|q| (q.match_key(), *q)).collect();
        let matched: Vec<(&OptionQuote, &OptionQuote)> = today
            .iter()
            .filter_map(|q| next_by_key.get(&q.match_key()).map(|n| (*q, *n)))
            .collect();
        if matched.is_empty() {
            skipped += 1;
            continue;
        }
        let quotes: Vec<&OptionQuote> = matched.iter().map(|(q, _)| *q).collect();
        let d = deltas(&quotes)?;
        if d.len() != quotes.len() {
            return Err(EvalError::Length(d.len(), quotes.len()));
        }
        let sum: f64 = matched
            .iter()
            .zip(&d)
            .map(|((q0, q1), &delta)| {
                let bond = -(delta * q0.s - q0.mid);
                delta * q1.s - q1.mid + bond * (q0.r / 252.0).exp()
            })
            .sum();
        total += (sum / matched.len() as f64).abs();
        used += 1;
        positions += matched.len();
    }
    Ok(HedgeSummary {
        he: if used > 0 { total / used as f64 } else { 0.0 },
        days_used: used,
        days_skipped: skipped,
        positions,
    })
}

pub fn hedge_error(model: &dyn OptionModel, panel: &OptionPanel) -> Result<HedgeSummary, EvalError> {
    hedge_error_with(panel, |qs| {
        let xs = qs.iter().map(|q| q.inputs()).collect::<Result<Vec<_>, _>>()?;
        model.deltas(&xs)
    })
}
