use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use skinn::eval::{decile_backtest, CrossSection, GroupMetrics};
use skinn::trainer::{fit_meanvar_weights, MeanVarSpec};

use crate::common::{BoxError, Outcome};

/// Minimiser of −wᵀf + η‖w‖² on the capped simplex: wᵢ = clip((fᵢ + ν)/2η),
/// with ν found by bisection so the weights sum to one.
fn projected_qp(f: &[f64], eta: f64, lo: f64, hi: f64) -> Vec<f64> {
    let weights = |nu: f64| -> Vec<f64> { f.iter().map(|x| ((x + nu) / (2.0 * eta)).clamp(lo, hi)).collect() };
    let (mut a, mut b) = (-1e9, 1e9);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if weights(mid).iter().sum::<f64>() < 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    weights(0.5 * (a + b))
}

fn meanvar() -> Result<Outcome, BoxError> {
    let n = 10;
    let mut rng = StdRng::seed_from_u64(31);
    let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.02..0.02)).collect();
    let init: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..0.2)).collect();
    let eta = 1e6;
    let spec = MeanVarSpec::new(DMatrix::identity(n, n), eta, vec![0.0; n], vec![1.0; n])?;
    let w = fit_meanvar_weights(&f, &spec, &init, 2000, 0.05)?;
    let oracle = projected_qp(&f, eta, 0.0, 1.0);
    let to_uniform = w.iter().map(|x| (x - 1.0 / n as f64).abs()).fold(0.0, f64::max);
    let to_oracle = w.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Outcome::new(
        to_uniform <= 1e-3 && to_oracle <= 1e-3,
        format!("eta=1e6 weights: max dev {to_uniform:.1e} from uniform, {to_oracle:.1e} from QP"),
    ))
}

fn close(g: &GroupMetrics, mean: f64, sd: f64, sharpe: f64) -> bool {
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
    near(g.mean_pct, mean) && near(g.sd_pct, sd) && g.sharpe.is_some_and(|s| near(s, sharpe))
}

fn deciles() -> Result<Outcome, BoxError> {
    let assets: Vec<String> = (0..10).map(|i| format!("a{i}")).collect();
    let day1 = CrossSection {
        date: "2021-01-04".into(),
        assets: assets.clone(),
        predicted: (0..10).map(|i| 0.1 * (i + 1) as f64).collect(),
        realized: (0..10).map(|i| 0.001 * i as f64).collect(),
    };
    let mut realized2 = vec![0.001; 10];
    realized2[0] = 0.004;
    realized2[9] = -0.002;
    let day2 = CrossSection {
        date: "2021-01-05".into(),
        assets,
        predicted: (0..10).map(|i| 1.0 - 0.1 * i as f64).collect(),
        realized: realized2,
    };
    let report = decile_backtest(&[day1, day2])?;
    // H earns 0.009 then 0.004, L 0.000 then −0.002; one asset per decile.
    let h = close(&report.deciles[0], 163.8, 5.612486080160911, 29.184927616836745);
    let l = close(&report.deciles[9], -25.2, 2.244994432064365, -11.224972160321823);
    let hl = close(&report.spread, 189.0, 3.367491648096547, 56.124860801609124);
    let d5 = report.deciles[4].daily == [0.001 * 5.0, 0.001];
    Ok(Outcome::new(
        h && l && hl && d5,
        format!(
            "H-L mean {:.4}% sd {:.4}% sharpe {:.4}",
            report.spread.mean_pct,
            report.spread.sd_pct,
            report.spread.sharpe.unwrap_or(f64::NAN)
        ),
    ))
}

pub fn meanvar_and_deciles() -> Result<Outcome, BoxError> {
    Ok(Outcome::all(vec![meanvar()?, deciles()?]))
}
