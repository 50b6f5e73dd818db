use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use skinn::nn::{Activation, MlpConfig};
use skinn::panel::OptionPanel;
use skinn::skr::{ReprId, Representation};
use skinn::synth::{bsm_panel, PanelSpec};
use skinn::trainer::{
    fit_fixed_signal, kernel_values, network_ratio, train_on, train_skinn, FittedModel, TrainConfig, TrainingData,
};

use crate::common::{bs_call, rmse, BoxError, Outcome};

pub fn recovery() -> Result<Outcome, BoxError> {
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let panel = bsm_panel(
            &PanelSpec {
                noise: 0.01,
                seed,
                ..PanelSpec::default()
            },
            0.2,
        )?;
        let cfg = TrainConfig::new(ReprId::Bsm).with_seed(seed);
        let model = train_skinn(&cfg, &Representation::Bsm, &panel)?;
        let err = (model.phi[0] - 0.2).abs();
        worst = worst.max(err);
        if err < 0.01 {
            hits += 1;
        }
    }
    Ok(Outcome::new(hits >= 18, format!("{hits}/20 seeds within 0.01, worst |sigma-0.2| {worst:.4}")))
}

fn ratio_inputs(rng: &mut StdRng, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, 3), |(_, j)| match j {
        0 => rng.gen_range(0.8..1.2),
        1 => rng.gen_range(0.25..1.0),
        _ => 0.02,
    })
}

fn bs_ratio(x: &Array2<f64>) -> Vec<f64> {
    x.rows().into_iter().map(|r| bs_call(1.0, r[0], r[2], r[1], 0.2) / r[0]).collect()
}

pub fn lambda_star() -> Result<Outcome, BoxError> {
    let lambdas = [0.25, 1.0, 4.0, 16.0];
    let mut hits = 0;
    let mut picks = Vec::new();
    for seed in 0..10u64 {
        let mut rng = StdRng::seed_from_u64(500 + seed);
        let x = ratio_inputs(&mut rng, 500);
        let f0 = bs_ratio(&x);
        let eps = Normal::new(0.0, 0.02)?;
        let eta = Normal::new(0.0, 0.01)?;
        let y: Vec<f64> = f0.iter().map(|v| v + eps.sample(&mut rng)).collect();
        let g: Vec<f64> = f0.iter().map(|v| v + eta.sample(&mut rng)).collect();
        let test = ratio_inputs(&mut rng, 2000);
        let truth = bs_ratio(&test);
        let mut mse = Vec::new();
        for &lambda in &lambdas {
            let cfg = TrainConfig {
                epochs: 2000,
                lr: 3e-3,
                mlp: MlpConfig::new(3, 2, 16).with_activation(Activation::Silu),
                ..TrainConfig::new(ReprId::Bsm).with_seed(seed).with_lambda(lambda)
            };
            let params = fit_fixed_signal(&cfg, x.view(), &y, x.view(), &g)?;
            let pred = network_ratio(&params, test.view())?;
            mse.push(rmse(&pred, &truth).powi(2));
        }
        let best = (0..lambdas.len()).min_by(|&a, &b| mse[a].total_cmp(&mse[b])).ok_or("no lambda")?;
        if (1..=3).contains(&best) {
            hits += 1;
        }
        picks.push(format!("{}", lambdas[best]));
    }
    Ok(Outcome::new(hits >= 8, format!("argmin in {{1,4,16}} for {hits}/10 seeds (picks {})", picks.join(" "))))
}

pub fn blend() -> Result<Outcome, BoxError> {
    let mut rng = StdRng::seed_from_u64(61);
    let x = ratio_inputs(&mut rng, 400);
    let y: Vec<f64> = bs_ratio(&x).into_iter().map(|v| v + 0.01).collect();
    let lambda = 1.0;
    let cfg = TrainConfig {
        epochs: 3000,
        lr: 3e-3,
        n_colloc: x.nrows(),
        mlp: MlpConfig::new(3, 2, 32).with_activation(Activation::Silu),
        ..TrainConfig::new(ReprId::Bsm).with_seed(3).with_lambda(lambda)
    };
    let data = TrainingData {
        colloc: x.clone(),
        x,
        y,
        colloc_r: 0.02,
    };
    let model = train_on(&cfg, &Representation::Bsm, &data, |_, _| {})?;
    let f = network_ratio(&model.params, data.x.view())?;
    let g = kernel_values(&Representation::Bsm, &model.raw_phi, data.x.view())?;
    let mad = f
        .iter()
        .zip(&data.y)
        .zip(&g)
        .map(|((f, y), g)| (f - (y + lambda * g) / (1.0 + lambda)).abs())
        .sum::<f64>()
        / f.len() as f64;
    Ok(Outcome::new(mad < 2e-2, format!("MAD to the pointwise blend {mad:.2e} (sigma-hat {:.4})", model.phi[0])))
}

fn price_rmse(model: &FittedModel, panel: &OptionPanel) -> Result<f64, BoxError> {
    let xs = panel.quotes.iter().map(|q| q.inputs()).collect::<Result<Vec<_>, _>>()?;
    let mids: Vec<f64> = panel.quotes.iter().map(|q| q.mid).collect();
    Ok(rmse(&model.prices(&xs)?, &mids))
}

pub fn regime_shift() -> Result<Outcome, BoxError> {
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..10u64 {
        let train = bsm_panel(
            &PanelSpec {
                days: 10,
                contracts: 100,
                noise: 0.01,
                seed,
                ..PanelSpec::default()
            },
            0.2,
        )?;
        let test = bsm_panel(
            &PanelSpec {
                days: 5,
                contracts: 100,
                m_range: (0.7, 1.3),
                seed: 1000 + seed,
                ..PanelSpec::default()
            },
            0.35,
        )?;
        let base = TrainConfig::new(ReprId::Bsm).with_seed(seed);
        let skinn = train_skinn(&base, &Representation::Bsm, &train)?;
        let plain = train_skinn(&base.clone().with_lambda(0.0), &Representation::Bsm, &train)?;
        let (a, b) = (price_rmse(&skinn, &test)?, price_rmse(&plain, &test)?);
        if a <= b {
            wins += 1;
        }
        pairs.push(format!("{a:.3}/{b:.3}"));
    }
    Ok(Outcome::new(wins >= 7, format!("SKINN <= NN in {wins}/10 seeds (rmse {})", pairs.join(" "))))
}
