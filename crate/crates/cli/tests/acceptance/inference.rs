use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use skinn::inference::{infer_phi, sandwich, InferenceError, MEstimator};
use skinn::nn::{Activation, MlpConfig};
use skinn::skr::{ReprId, Representation};
use skinn::synth::{bsm_panel, PanelSpec};
use skinn::trainer::{train_on, TrainConfig, TrainingData};

use crate::common::{BoxError, Outcome};

/// Least squares as an M-estimator with loss ½(yᵢ − xᵢᵀβ)².
struct Ols {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Ols {
    fn residuals(&self, b: &[f64]) -> DVector<f64> {
        &self.y - &self.x * DVector::from_column_slice(b)
    }
}

impl MEstimator for Ols {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    fn mean_grad(&self, b: &[f64]) -> Result<Vec<f64>, InferenceError> {
        let g = -(self.x.transpose() * self.residuals(b)) / self.n_obs() as f64;
        Ok(g.iter().copied().collect())
    }

    fn scores(&self, b: &[f64]) -> Result<Array2<f64>, InferenceError> {
        let e = self.residuals(b);
        Ok(Array2::from_shape_fn((self.n_obs(), self.dim()), |(i, j)| -self.x[(i, j)] * e[i]))
    }
}

fn ols_check() -> Result<Outcome, BoxError> {
    let n = 300;
    let mut rng = StdRng::seed_from_u64(8);
    let z = Normal::new(0.0, 1.0)?;
    let x: DMatrix<f64> = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { rng.gen_range(-2.0..2.0) });
    let y = DVector::from_fn(n, |i, _| 0.5 + x[(i, 1)] - 0.3 * x[(i, 2)] + (0.2 + x[(i, 1)].abs()) * z.sample(&mut rng));
    let xtx_inv = (x.transpose() * &x).try_inverse().ok_or("singular design")?;
    let beta = &xtx_inv * x.transpose() * &y;
    let e = &y - &x * &beta;
    let meat = DMatrix::from_fn(3, 3, |a, b| (0..n).map(|i| e[i] * e[i] * x[(i, a)] * x[(i, b)]).sum());
    let hc0 = &xtx_inv * meat * &xtx_inv;
    let est = sandwich(
        &Ols {
            x: x.clone(),
            y: y.clone(),
        },
        beta.as_slice(),
    )?;
    let diff = (&est.v / n as f64 - &hc0).abs().max();
    let scale = hc0.abs().max();
    Ok(Outcome::new(
        diff <= 1e-6 * scale && !est.regularized,
        format!("OLS sandwich vs HC0 max rel {:.1e}", diff / scale),
    ))
}

pub fn coverage() -> Result<Outcome, BoxError> {
    let reps = 200;
    let cfg = TrainConfig {
        epochs: 1000,
        lr: 3e-3,
        n_colloc: 256,
        mlp: MlpConfig::new(3, 2, 8).with_activation(Activation::Silu),
        ..TrainConfig::new(ReprId::Bsm).with_seed(7)
    };
    let repr = Representation::Bsm;
    let mut covered = 0;
    let mut ridged = 0;
    for rep in 0..reps {
        let panel = bsm_panel(
            &PanelSpec {
                days: 10,
                contracts: 50,
                noise: 0.05,
                seed: 100 + rep,
                ..PanelSpec::default()
            },
            0.2,
        )?;
        let data = TrainingData::build(&cfg, &panel)?;
        let model = train_on(&cfg, &repr, &data, |_, _| {})?;
        let report = infer_phi(&model, &repr, &data, 0.05)?;
        let p = &report.params[0];
        if p.lo <= 0.2 && 0.2 <= p.hi {
            covered += 1;
        }
        if report.regularized {
            ridged += 1;
        }
    }
    let rate = covered as f64 / reps as f64;
    Ok(Outcome::all(vec![
        Outcome::new(
            (0.90..=0.98).contains(&rate),
            format!("95% CI covers sigma in {covered}/{reps} = {rate:.3} ({ridged} ridged)"),
        ),
        ols_check()?,
    ]))
}
