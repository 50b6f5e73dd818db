use nalgebra::DMatrix;

use crate::autodiff::{Tape, Var};
use crate::optim::Adam;

use super::TrainError;

/// Risk model and weight box of the mean-variance loss −wᵀf + η wᵀΣw.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVarSpec {
    pub sigma: DMatrix<f64>,
    pub eta: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl MeanVarSpec {
    pub fn new(sigma: DMatrix<f64>, eta: f64, lower: Vec<f64>, upper: Vec<f64>) -> Result<MeanVarSpec, TrainError> {
        let n = lower.len();
        if sigma.nrows() != n || sigma.ncols() != n || upper.len() != n || n == 0 {
            return Err(TrainError::Config(format!(
                "covariance is {}x{}, bounds have {} and {} entries",
                sigma.nrows(),
                sigma.ncols(),
                lower.len(),
                upper.len()
            )));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(TrainError::Config(format!("eta must be finite and non-negative, got {eta}")));
        }
        let scale = sigma.amax().max(1.0);
        if (&sigma - sigma.transpose()).amax() > 1e-12 * scale {
            return Err(TrainError::Config("covariance is not symmetric".into()));
        }
        if sigma.clone().symmetric_eigenvalues().min() < -1e-10 * scale {
            return Err(TrainError::Config("covariance is not positive semi-definite".into()));
        }
        if let Some(i) = (0..n).find(|&i| !(lower[i] <= upper[i])) {
            return Err(TrainError::Infeasible(format!("asset {i}: lower {} above upper {}", lower[i], upper[i])));
        }
        let (sl, su): (f64, f64) = (lower.iter().sum(), upper.iter().sum());
        if sl > 1.0 || su < 1.0 {
            return Err(TrainError::Infeasible(format!("sum of lower bounds {sl}, sum of upper bounds {su}")));
        }
        Ok(MeanVarSpec { sigma, eta, lower, upper })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Assets whose normalised weight exceeds its upper bound by more than 1e-6.
    pub fn above_upper(&self, w: &[f64]) -> Vec<usize> {
        (0..w.len()).filter(|&i| w[i] > self.upper[i] + 1e-6).collect()
    }
}

/// Clamps each raw weight into [lᵢ, uᵢ] and rescales the result to sum to 1.
pub fn clamp_normalize<'t>(w_raw: &[Var<'t>], spec: &MeanVarSpec) -> Vec<Var<'t>> {
    let c: Vec<Var<'t>> = w_raw
        .iter()
        .zip(spec.lower.iter().zip(&spec.upper))
        .map(|(w, (&l, &u))| w.clamp(l, u))
        .collect();
    let total = w_raw[0].tape().sum(&c);
    c.into_iter().map(|x| x / total).collect()
}

/// −wᵀf + η wᵀΣw with w = clamp_normalize(w_raw).
pub fn meanvar_sk_loss<'t>(f: &[Var<'t>], w_raw: &[Var<'t>], spec: &MeanVarSpec) -> Result<Var<'t>, TrainError> {
    let n = spec.len();
    if f.len() != n || w_raw.len() != n {
        return Err(TrainError::Config(format!(
            "{n} assets but {} predictions and {} weights",
            f.len(),
            w_raw.len()
        )));
    }
    let tape = w_raw[0].tape();
    let w = clamp_normalize(w_raw, spec);
    if w.iter().any(|x| !x.value().is_finite()) {
        return Err(TrainError::Infeasible("all clamped weights are zero".into()));
    }
    let ret = tape.dot(&w, f, tape.constant(0.0));
    let sw: Vec<Var<'t>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = spec.sigma.row(i).iter().copied().collect();
            tape.dot_const(&w, &row, 0.0)
        })
        .collect();
    let risk = tape.dot(&w, &sw, tape.constant(0.0));
    Ok(risk * spec.eta - ret)
}

/// Minimises the loss over the raw weights for fixed predictions `f` with
/// Adam, the step size decaying geometrically to 1% of `lr`. Returns the
/// normalised weights.
pub fn fit_meanvar_weights(f: &[f64], spec: &MeanVarSpec, init_raw: &[f64], epochs: usize, lr: f64) -> Result<Vec<f64>, TrainError> {
    let mut raw = init_raw.to_vec();
    let mut opt = Adam::new(raw.len(), lr);
    let tape = Tape::new();
    let mark = tape.checkpoint();
    for epoch in 0..epochs {
        opt.lr = lr * 0.01f64.powf(epoch as f64 / epochs.max(2).saturating_sub(1) as f64);
        let w = tape.vars(&raw)?;
        let fv: Vec<Var<'_>> = f.iter().map(|&x| tape.constant(x)).collect();
        let loss = meanvar_sk_loss(&fv, &w, spec)?;
        if !loss.value().is_finite() {
            return Err(TrainError::NonFinite {
                epoch,
                component: "mean-variance loss",
            });
        }
        let g = tape.grad(loss, &w)?;
        tape.truncate(mark);
        opt.step(&mut raw, &g);
    }
    let w = tape.vars(&raw)?;
    Ok(clamp_normalize(&w, spec).iter().map(|v| v.value()).collect())
}
