use std::io::{Read, Write};

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::autodiff::Var;
use crate::nn::{read_line, read_params, write_params, MlpConfig, MlpParams};
use crate::optim::Adam;
use crate::rng::{rng_for, stream};

use super::{Bounds, SurrogateDataset, SurrogateError};

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateTrainConfig {
    /// Network shape; `input_dim` must match the dataset and `output_dim` be 1.
    pub mlp: MlpConfig,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Learning rate at the last epoch as a fraction of `lr`, reached geometrically.
    pub lr_final_frac: f64,
}

impl SurrogateTrainConfig {
    pub fn new(mlp: MlpConfig) -> Self {
        SurrogateTrainConfig {
            mlp,
            epochs: 200,
            lr: 1e-3,
            batch_size: 512,
            lr_final_frac: 0.05,
        }
    }
}

/// A trained network with its input box and output standardisation.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenSurrogate {
    params: MlpParams,
    bounds: Bounds,
    out_mean: f64,
    out_scale: f64,
    /// In-sample RMSE in price units at the end of training.
    pub final_rmse: f64,
}

impl FrozenSurrogate {
    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn input_dim(&self) -> usize {
        self.bounds.len()
    }

    fn center_half(&self, j: usize) -> (f64, f64) {
        let (lo, hi) = (self.bounds.lo[j], self.bounds.hi[j]);
        (0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    fn normalize_rows(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut u = x.to_owned();
        for (j, mut col) in u.axis_iter_mut(Axis(1)).enumerate() {
            let (c, h) = self.center_half(j);
            col.mapv_inplace(|v| (v - c) / h);
        }
        u
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, SurrogateError> {
        let u: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let (c, h) = self.center_half(j);
                (v - c) / h
            })
            .collect();
        Ok(self.out_mean + self.out_scale * self.params.forward_value(&u)?[0])
    }

    pub fn eval_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, SurrogateError> {
        let fwd = self.params.forward_batch(self.normalize_rows(x).view())?;
        Ok(fwd.output_column(0).into_iter().map(|v| self.out_mean + self.out_scale * v).collect())
    }

    /// Output on the tape; only `x` is differentiable.
    pub fn forward<'t>(&self, x: &[Var<'t>]) -> Result<Var<'t>, SurrogateError> {
        if x.len() != self.input_dim() {
            return Err(SurrogateError::Shape {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let u: Vec<Var<'t>> = x
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let (c, h) = self.center_half(j);
                (v - c) / h
            })
            .collect();
        let out = self.params.forward_frozen(&u)?[0];
        Ok(out * self.out_scale + self.out_mean)
    }
}

pub(super) fn standardize(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, if sd > 1e-12 { sd } else { 0.0 })
}

fn scaled(y: f64, mean: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        (y - mean) / scale
    } else {
        0.0
    }
}

/// Mini-batch Adam on the mean squared error of `targets` (`n × output_dim`)
/// against the network output at `inputs`. Returns the loss of every epoch.
pub(super) fn fit_minibatch(
    params: &mut MlpParams,
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    cfg: &SurrogateTrainConfig,
) -> Result<Vec<f64>, SurrogateError> {
    let n = inputs.nrows();
    let batch = cfg.batch_size.clamp(1, n);
    let mut opt = Adam::new(params.len(), cfg.lr);
    let mut rng = rng_for(cfg.mlp.seed, stream::SHUFFLE);
    let mut order: Vec<usize> = (0..n).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        opt.lr = cfg.lr * cfg.lr_final_frac.powf(epoch as f64 / cfg.epochs.max(2).saturating_sub(1) as f64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(batch) {
            let xb = inputs.select(Axis(0), idx);
            let yb = targets.select(Axis(0), idx);
            let fwd = params.forward_batch(xb.view())?;
            let resid = fwd.output() - &yb;
            total += resid.iter().map(|r| r * r).sum::<f64>();
            let scale = 2.0 / (idx.len() * resid.ncols()) as f64;
            let d_out = resid.mapv(|r| r * scale);
            let (grad, _) = params.backward_batch(&fwd, d_out.view());
            opt.step(params.flat_mut(), &grad);
        }
        let loss = total / (n * targets.ncols()) as f64;
        if !loss.is_finite() || params.flat().iter().any(|v| !v.is_finite()) {
            return Err(SurrogateError::Divergence { epoch });
        }
        losses.push(loss);
    }
    Ok(losses)
}

/// Fits a network to `dataset` on inputs scaled to [−1, 1] by the dataset
/// bounds and prices standardised to zero mean and unit variance.
pub fn train_surrogate(dataset: &SurrogateDataset, cfg: &SurrogateTrainConfig) -> Result<FrozenSurrogate, SurrogateError> {
    if dataset.is_empty() {
        return Err(SurrogateError::Empty);
    }
    let d = dataset.bounds.len();
    if cfg.mlp.input_dim != d || cfg.mlp.output_dim != 1 {
        return Err(SurrogateError::Shape {
            expected: d,
            got: cfg.mlp.input_dim,
        });
    }
    let mut params = MlpParams::init(&cfg.mlp)?;
    let (out_mean, out_scale) = standardize(&dataset.prices);
    let mut frozen = FrozenSurrogate {
        params: params.clone(),
        bounds: dataset.bounds.clone(),
        out_mean,
        out_scale,
        final_rmse: f64::NAN,
    };
    let u = frozen.normalize_rows(dataset.inputs.view());
    let y = Array2::from_shape_fn((dataset.len(), 1), |(i, _)| scaled(dataset.prices[i], out_mean, out_scale));
    fit_minibatch(&mut params, u.view(), y.view(), cfg)?;
    frozen.params = params;
    let pred = frozen.eval_batch(dataset.inputs.view())?;
    let mse = pred.iter().zip(&dataset.prices).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / dataset.len() as f64;
    frozen.final_rmse = mse.sqrt();
    Ok(frozen)
}

const MAGIC: &str = "skinn-surrogate v1";

pub(super) fn write_bounds<W: Write>(b: &Bounds, w: &mut W) -> std::io::Result<()> {
    for ((name, lo), hi) in b.names.iter().zip(&b.lo).zip(&b.hi) {
        writeln!(w, "bound={name},{lo},{hi}")?;
    }
    Ok(())
}

pub(super) fn parse_bound(v: &str, b: &mut Bounds) -> Result<(), SurrogateError> {
    let parts: Vec<&str> = v.split(',').collect();
    let bad = || SurrogateError::Format(format!("malformed bound {v:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    b.names.push(parts[0].to_string());
    b.lo.push(parts[1].parse().map_err(|_| bad())?);
    b.hi.push(parts[2].parse().map_err(|_| bad())?);
    Ok(())
}

pub(super) fn parse_f64(k: &str, v: &str) -> Result<f64, SurrogateError> {
    v.parse()
        .map_err(|_| SurrogateError::Format(format!("bad value for {k}: {v:?}")))
}

pub fn write_surrogate<W: Write>(s: &FrozenSurrogate, mut w: W) -> Result<(), SurrogateError> {
    writeln!(w, "{MAGIC}")?;
    write_bounds(&s.bounds, &mut w)?;
    writeln!(w, "out_mean={}", s.out_mean)?;
    writeln!(w, "out_scale={}", s.out_scale)?;
    writeln!(w, "final_rmse={}", s.final_rmse)?;
    writeln!(w, "end")?;
    write_params(&s.params, w)?;
    Ok(())
}

pub fn read_surrogate<R: Read>(mut r: R) -> Result<FrozenSurrogate, SurrogateError> {
    let magic = read_line(&mut r)?;
    if magic != MAGIC {
        return Err(SurrogateError::Format(format!("bad magic {magic:?}")));
    }
    let mut bounds = Bounds {
        names: vec![],
        lo: vec![],
        hi: vec![],
    };
    let (mut out_mean, mut out_scale, mut final_rmse) = (0.0, 1.0, f64::NAN);
    loop {
        let line = read_line(&mut r)?;
        if line == "end" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| SurrogateError::Format(format!("malformed line {line:?}")))?;
        match k {
            "bound" => parse_bound(v, &mut bounds)?,
            "out_mean" => out_mean = parse_f64(k, v)?,
            "out_scale" => out_scale = parse_f64(k, v)?,
            "final_rmse" => final_rmse = parse_f64(k, v)?,
            _ => return Err(SurrogateError::Format(format!("unknown key {k:?}"))),
        }
    }
    bounds.validate()?;
    let params = read_params(r)?;
    if params.config().input_dim != bounds.len() {
        return Err(SurrogateError::Shape {
            expected: bounds.len(),
            got: params.config().input_dim,
        });
    }
    Ok(FrozenSurrogate {
        params,
        bounds,
        out_mean,
        out_scale,
        final_rmse,
    })
}
