use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::autodiff::Tape;
use crate::nn::{MlpConfig, MlpParams};
use crate::skr::{Representation, SkrError};

use super::{network_inputs, TrainError};

const CHUNK: usize = 128;

/// Loss components at one parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub data: f64,
    pub sk: f64,
    pub total: f64,
}

/// Constrained parameters for a raw vector.
pub fn constrained_phi(repr: &Representation, raw: &[f64]) -> Result<Vec<f64>, SkrError> {
    let tape = Tape::new();
    let r: Vec<_> = raw.iter().map(|&v| tape.constant(v)).collect();
    Ok(repr.transform(&r)?.iter().map(|v| v.value()).collect())
}

/// ∂φ/∂raw as a `q × q` matrix (row = constrained coordinate).
pub fn transform_jacobian(repr: &Representation, raw: &[f64]) -> Result<Array2<f64>, SkrError> {
    let tape = Tape::new();
    let r = tape.vars(raw)?;
    let phi = repr.transform(&r)?;
    let mut jac = Array2::zeros((phi.len(), raw.len()));
    for (j, &p) in phi.iter().enumerate() {
        let adj = tape.backward(&[(p, 1.0)])?;
        for (k, g) in Tape::gather(&adj, &r).into_iter().enumerate() {
            jac[[j, k]] = g;
        }
    }
    Ok(jac)
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n).step_by(CHUNK).map(|a| (a, (a + CHUNK).min(n))).collect()
}

/// g_φ(x)/K at every collocation row (m, τ, r).
pub fn kernel_values(repr: &Representation, raw: &[f64], colloc: ArrayView2<'_, f64>) -> Result<Vec<f64>, SkrError> {
    let parts = chunk_ranges(colloc.nrows())
        .into_par_iter()
        .map(|(a, b)| {
            let tape = Tape::new();
            let r: Vec<_> = raw.iter().map(|&v| tape.constant(v)).collect();
            let pricer = repr.pricer(&repr.transform(&r)?)?;
            (a..b)
                .map(|i| {
                    let row = colloc.row(i);
                    pricer
                        .price_over_strike(row[0], row[1], row[2])
                        .map(|g| g.value())
                        .map_err(|e| e.at(i))
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.concat())
}

/// Kernel values and Σᵢ wᵢ ∂gᵢ/∂raw, where the weight of point i may depend
/// on its kernel value.
fn kernel_vjp<F>(repr: &Representation, raw: &[f64], colloc: ArrayView2<'_, f64>, weight: F) -> Result<(Vec<f64>, Vec<f64>), SkrError>
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    let parts = chunk_ranges(colloc.nrows())
        .into_par_iter()
        .map(|(a, b)| {
            let tape = Tape::new();
            let r = tape.vars(raw)?;
            let pricer = repr.pricer(&repr.transform(&r)?)?;
            let mut seeds = Vec::with_capacity(b - a);
            let mut values = Vec::with_capacity(b - a);
            for i in a..b {
                let row = colloc.row(i);
                let g = pricer.price_over_strike(row[0], row[1], row[2]).map_err(|e| e.at(i))?;
                values.push(g.value());
                seeds.push((g, weight(i, g.value())));
            }
            let adj = tape.backward(&seeds)?;
            Ok((values, Tape::gather(&adj, &r)))
        })
        .collect::<Result<Vec<_>, SkrError>>()?;
    let mut grad = vec![0.0; raw.len()];
    let mut values = Vec::with_capacity(colloc.nrows());
    for (v, g) in parts {
        values.extend(v);
        for (acc, x) in grad.iter_mut().zip(g) {
            *acc += x;
        }
    }
    Ok((values, grad))
}

/// Kernel values and the `M × q` Jacobian ∂gᵢ/∂raw.
fn kernel_jacobian(repr: &Representation, raw: &[f64], colloc: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Array2<f64>), SkrError> {
    let parts = chunk_ranges(colloc.nrows())
        .into_par_iter()
        .map(|(a, b)| {
            let tape = Tape::new();
            let r = tape.vars(raw)?;
            let pricer = repr.pricer(&repr.transform(&r)?)?;
            let mark = tape.checkpoint();
            let mut out = Vec::with_capacity(b - a);
            for i in a..b {
                let row = colloc.row(i);
                let g = pricer.price_over_strike(row[0], row[1], row[2]).map_err(|e| e.at(i))?;
                let adj = tape.backward(&[(g, 1.0)])?;
                out.push((g.value(), Tape::gather(&adj, &r)));
                tape.truncate(mark);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, SkrError>>()?;
    let q = raw.len();
    let rows: Vec<(f64, Vec<f64>)> = parts.concat();
    let mut jac = Array2::zeros((rows.len(), q));
    let mut values = Vec::with_capacity(rows.len());
    for (i, (v, g)) in rows.into_iter().enumerate() {
        values.push(v);
        jac.row_mut(i).assign(&ndarray::ArrayView1::from(&g));
    }
    Ok((values, jac))
}

/// The composite loss L_data + λ·L_SK as a function of the concatenated
/// vector (θ, raw φ).
pub struct Objective<'a> {
    repr: &'a Representation,
    mlp: MlpConfig,
    /// Network inputs of the observations.
    x_in: Array2<f64>,
    y: Vec<f64>,
    colloc: Array2<f64>,
    colloc_in: Array2<f64>,
    lambda: f64,
}

struct Eval {
    params: MlpParams,
    resid: Array2<f64>,
    fwd: crate::nn::BatchForward,
    colloc_fwd: Option<crate::nn::BatchForward>,
}

impl<'a> Objective<'a> {
    /// `x` holds (m, τ, r) rows with C/K targets `y`; `colloc` holds (m, τ, r).
    pub fn new(
        repr: &'a Representation,
        mlp: MlpConfig,
        x: Array2<f64>,
        y: Vec<f64>,
        colloc: Array2<f64>,
        lambda: f64,
    ) -> Result<Objective<'a>, TrainError> {
        if x.nrows() == 0 {
            return Err(TrainError::EmptyPanel);
        }
        if x.nrows() != y.len() || x.ncols() != 3 || colloc.ncols() != 3 || mlp.input_dim != 3 || mlp.output_dim != 1 {
            return Err(TrainError::Config("observation, collocation and network shapes disagree".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(TrainError::Config(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        if lambda > 0.0 && colloc.nrows() == 0 {
            return Err(TrainError::Config("lambda > 0 needs collocation points".into()));
        }
        Ok(Objective {
            repr,
            mlp,
            x_in: network_inputs(x.view()),
            y,
            colloc_in: network_inputs(colloc.view()),
            colloc,
            lambda,
        })
    }

    pub fn nn_len(&self) -> usize {
        self.mlp.param_count()
    }

    pub fn dim(&self) -> usize {
        self.nn_len() + self.repr.dim()
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn uses_kernel(&self) -> bool {
        self.lambda > 0.0
    }

    fn eval(&self, v: &[f64]) -> Result<Eval, TrainError> {
        if v.len() != self.dim() {
            return Err(TrainError::Config(format!("parameter vector has {} entries, expected {}", v.len(), self.dim())));
        }
        let params = MlpParams::from_flat(&self.mlp, v[..self.nn_len()].to_vec())?;
        let fwd = params.forward_batch(self.x_in.view())?;
        let mut resid = fwd.output().clone();
        for (r, y) in resid.column_mut(0).iter_mut().zip(&self.y) {
            *r -= y;
        }
        let colloc_fwd = if self.uses_kernel() {
            Some(params.forward_batch(self.colloc_in.view())?)
        } else {
            None
        };
        Ok(Eval {
            params,
            resid,
            fwd,
            colloc_fwd,
        })
    }

    fn data_mse(&self, e: &Eval) -> f64 {
        e.resid.iter().map(|r| r * r).sum::<f64>() / self.n_obs() as f64
    }

    fn parts(&self, data: f64, sk: f64) -> LossParts {
        LossParts {
            data,
            sk,
            total: data + self.lambda * sk,
        }
    }

    /// Loss components; L_SK is reported as 0 (and not evaluated) when λ = 0.
    pub fn loss(&self, v: &[f64]) -> Result<LossParts, TrainError> {
        let e = self.eval(v)?;
        let data = self.data_mse(&e);
        let sk = match &e.colloc_fwd {
            None => 0.0,
            Some(cf) => {
                let g = kernel_values(self.repr, &v[self.nn_len()..], self.colloc.view())?;
                let f = cf.output().column(0);
                f.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / g.len() as f64
            }
        };
        Ok(self.parts(data, sk))
    }

    /// Loss components and the gradient with respect to (θ, raw φ).
    pub fn loss_and_grad(&self, v: &[f64]) -> Result<(LossParts, Vec<f64>), TrainError> {
        let e = self.eval(v)?;
        let p = self.nn_len();
        let n = self.n_obs() as f64;
        let data = self.data_mse(&e);
        let d_out = e.resid.mapv(|r| 2.0 * r / n);
        let (mut grad, _) = e.params.backward_batch(&e.fwd, d_out.view());
        let mut sk = 0.0;
        let mut phi_grad = vec![0.0; self.repr.dim()];
        if let Some(cf) = &e.colloc_fwd {
            let m = self.colloc.nrows() as f64;
            let f = cf.output().column(0);
            let lam = self.lambda;
            let (g, pg) = kernel_vjp(self.repr, &v[p..], self.colloc.view(), |i, gi| -2.0 * lam * (f[i] - gi) / m)?;
            sk = f.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / m;
            let dc = Array2::from_shape_fn((g.len(), 1), |(i, _)| 2.0 * lam * (f[i] - g[i]) / m);
            let (gc, _) = e.params.backward_batch(cf, dc.view());
            for (a, b) in grad.iter_mut().zip(gc) {
                *a += b;
            }
            phi_grad = pg;
        }
        grad.extend(phi_grad);
        Ok((self.parts(data, sk), grad))
    }

    /// Per-observation gradients of ℓᵢ = (f(xᵢ) − yᵢ)² + λ(f(cⱼ) − g(cⱼ))²
    /// with j = i mod M, as an `N × dim` matrix.
    pub fn per_sample_scores(&self, v: &[f64]) -> Result<Array2<f64>, TrainError> {
        let e = self.eval(v)?;
        let p = self.nn_len();
        let d_out = e.resid.mapv(|r| 2.0 * r);
        let data = e.params.per_sample_grads(&e.fwd, d_out.view());
        let mut out = Array2::zeros((self.n_obs(), self.dim()));
        out.slice_mut(ndarray::s![.., ..p]).assign(&data);
        if let Some(cf) = &e.colloc_fwd {
            let (g, jac) = kernel_jacobian(self.repr, &v[p..], self.colloc.view())?;
            let f = cf.output().column(0);
            let w: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.0 * self.lambda * (a - b)).collect();
            let dc = Array2::from_shape_fn((g.len(), 1), |(i, _)| w[i]);
            let theta_c = e.params.per_sample_grads(cf, dc.view());
            let m = g.len();
            for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
                let j = i % m;
                for (a, b) in row.iter_mut().take(p).zip(theta_c.row(j)) {
                    *a += b;
                }
                for (a, b) in row.iter_mut().skip(p).zip(jac.row(j)) {
                    *a = -w[j] * b;
                }
            }
        }
        Ok(out)
    }
}
