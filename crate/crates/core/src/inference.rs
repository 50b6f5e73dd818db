//! Sandwich inference for M-estimators.
//!
//! For an estimator minimising the mean of per-observation losses ℓᵢ(x),
//! V = H⁻¹ Ξ H⁻¹ with H the Hessian of the mean loss and Ξ the mean outer
//! product of per-observation scores. H is built from central differences
//! of the exact gradient. Var(x̂) ≈ V/N.

use std::io::Write;

use nalgebra::DMatrix;
use ndarray::Array2;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::skr::{param_names, Representation};
use crate::trainer::{transform_jacobian, FittedModel, Objective, TrainError, TrainingData};

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("non-finite Hessian entry in column {0}")]
    NonFiniteHessian(usize),
    #[error("Hessian is singular even after regularisation")]
    Singular,
    #[error("no observations")]
    Empty,
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An estimator defined by the mean of per-observation losses.
pub trait MEstimator: Sync {
    fn dim(&self) -> usize;
    fn n_obs(&self) -> usize;
    /// Gradient of the mean loss.
    fn mean_grad(&self, x: &[f64]) -> Result<Vec<f64>, InferenceError>;
    /// Per-observation gradients, `n_obs × dim`.
    fn scores(&self, x: &[f64]) -> Result<Array2<f64>, InferenceError>;
}

/// Ξ = (1/N) Σ sᵢ sᵢᵀ.
pub fn score_outer_product(scores: &Array2<f64>) -> Result<DMatrix<f64>, InferenceError> {
    let n = scores.nrows();
    if n == 0 {
        return Err(InferenceError::Empty);
    }
    let xi = scores.t().dot(scores) / n as f64;
    Ok(DMatrix::from_fn(xi.nrows(), xi.ncols(), |i, j| xi[[i, j]]))
}

/// Central-difference Hessian of `est` at `x` before symmetrisation.
pub fn raw_hessian<E: MEstimator>(est: &E, x: &[f64]) -> Result<DMatrix<f64>, InferenceError> {
    let d = est.dim();
    if x.len() != d {
        return Err(InferenceError::Shape(format!("point has {} coordinates, estimator {d}", x.len())));
    }
    let cols = (0..d)
        .into_par_iter()
        .map(|j| {
            let h = 1e-4 * (1.0 + x[j].abs());
            let mut up = x.to_vec();
            up[j] += h;
            let mut dn = x.to_vec();
            dn[j] -= h;
            let (gu, gd) = (est.mean_grad(&up)?, est.mean_grad(&dn)?);
            let col: Vec<f64> = gu.iter().zip(&gd).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            if col.iter().any(|v| !v.is_finite()) {
                return Err(InferenceError::NonFiniteHessian(j));
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DMatrix::from_fn(d, d, |i, j| cols[j][i]))
}

/// (H + Hᵀ)/2 of [`raw_hessian`].
pub fn empirical_hessian<E: MEstimator>(est: &E, x: &[f64]) -> Result<DMatrix<f64>, InferenceError> {
    let h = raw_hessian(est, x)?;
    Ok((&h + h.transpose()) * 0.5)
}

pub const MAX_CONDITION: f64 = 1e12;
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichEstimate {
    pub hessian: DMatrix<f64>,
    pub hessian_inv: DMatrix<f64>,
    pub xi: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// Condition number of the Hessian before any ridge.
    pub condition: f64,
    /// Whether `RIDGE·I` was added to the Hessian.
    pub regularized: bool,
    pub n_obs: usize,
}

impl SandwichEstimate {
    /// Sub-block of V for the given coordinates.
    pub fn block(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.v[(idx[a], idx[b])])
    }
}

fn condition_number(h: &DMatrix<f64>) -> f64 {
    let s = h.clone().singular_values();
    let (max, min) = (s.max(), s.min());
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// V = H⁻¹ Ξ H⁻¹ from a Hessian and score matrix.
pub fn sandwich_from_parts(hessian: DMatrix<f64>, xi: DMatrix<f64>, n_obs: usize) -> Result<SandwichEstimate, InferenceError> {
    let condition = condition_number(&hessian);
    let regularized = !(condition <= MAX_CONDITION);
    let h = if regularized {
        &hessian + DMatrix::identity(hessian.nrows(), hessian.ncols()) * RIDGE
    } else {
        hessian.clone()
    };
    if regularized && !(condition_number(&h).is_finite()) {
        return Err(InferenceError::Singular);
    }
    let hinv = h.try_inverse().ok_or(InferenceError::Singular)?;
    let hinv = (&hinv + hinv.transpose()) * 0.5;
    let v = &hinv * &xi * &hinv;
    let v = (&v + v.transpose()) * 0.5;
    Ok(SandwichEstimate {
        hessian,
        hessian_inv: hinv,
        xi,
        v,
        condition,
        regularized,
        n_obs,
    })
}

pub fn sandwich<E: MEstimator>(est: &E, x: &[f64]) -> Result<SandwichEstimate, InferenceError> {
    let hessian = empirical_hessian(est, x)?;
    let xi = score_outer_product(&est.scores(x)?)?;
    sandwich_from_parts(hessian, xi, est.n_obs())
}

/// z_{1−α/2}.
pub fn z_value(alpha: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - alpha / 2.0)
}

/// φ̂ⱼ ± z·√(Vⱼⱼ/N) per coordinate.
pub fn confidence_interval(phi: &[f64], v: &DMatrix<f64>, n: usize, alpha: f64) -> Vec<(f64, f64)> {
    let z = z_value(alpha);
    phi.iter()
        .enumerate()
        .map(|(j, &p)| {
            let se = (v[(j, j)].max(0.0) / n as f64).sqrt();
            (p - z * se, p + z * se)
        })
        .collect()
}

impl MEstimator for Objective<'_> {
    fn dim(&self) -> usize {
        Objective::dim(self)
    }

    fn n_obs(&self) -> usize {
        Objective::n_obs(self)
    }

    fn mean_grad(&self, x: &[f64]) -> Result<Vec<f64>, InferenceError> {
        Ok(self.loss_and_grad(x)?.1)
    }

    fn scores(&self, x: &[f64]) -> Result<Array2<f64>, InferenceError> {
        Ok(self.per_sample_scores(x)?)
    }
}

/// Per-parameter row of an inference report.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamInference {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    pub params: Vec<ParamInference>,
    /// Covariance of √N(φ̂ − φ*) in constrained coordinates.
    pub v_phi: DMatrix<f64>,
    pub regularized: bool,
    pub condition: f64,
    pub n_obs: usize,
}

/// Sandwich inference on the constrained φ of a fitted model, through the
/// delta method on the parameter transform.
pub fn infer_phi(model: &FittedModel, repr: &Representation, data: &TrainingData, alpha: f64) -> Result<InferenceReport, InferenceError> {
    let obj = data.objective(&model.config, repr)?;
    let x = model.vector();
    let est = sandwich(&obj, &x)?;
    let p = obj.nn_len();
    let q = repr.dim();
    let raw_block = est.block(&(p..p + q).collect::<Vec<_>>());
    let jac = transform_jacobian(repr, &model.raw_phi).map_err(TrainError::from)?;
    let j = DMatrix::from_fn(q, q, |a, b| jac[[a, b]]);
    let v_phi = &j * raw_block * j.transpose();
    let v_phi = (&v_phi + v_phi.transpose()) * 0.5;
    let n = est.n_obs;
    let ci = confidence_interval(&model.phi, &v_phi, n, alpha);
    let names = param_names(repr);
    let params = (0..q)
        .map(|k| ParamInference {
            name: names[k].clone(),
            estimate: model.phi[k],
            std_error: (v_phi[(k, k)].max(0.0) / n as f64).sqrt(),
            lo: ci[k].0,
            hi: ci[k].1,
        })
        .collect();
    Ok(InferenceReport {
        params,
        v_phi,
        regularized: est.regularized,
        condition: est.condition,
        n_obs: n,
    })
}

pub fn write_report_csv<W: Write>(r: &InferenceReport, w: W) -> Result<(), InferenceError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["parameter", "estimate", "std_error", "ci_lo", "ci_hi", "regularized"])?;
    for p in &r.params {
        out.write_record([
            p.name.clone(),
            p.estimate.to_string(),
            p.std_error.to_string(),
            p.lo.to_string(),
            p.hi.to_string(),
            r.regularized.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
