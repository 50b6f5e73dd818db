use skinn::eval::{dm_test, wilcoxon_test};

use crate::common::{BoxError, Outcome};

fn series(n: usize, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|t| {
            let t = t as f64;
            (0.7 * t + phase).sin().powi(2) + 0.3 * (1.9 * t).cos().abs() + 0.01 * t
        })
        .collect()
}

/// Diebold–Mariano statistic with a Bartlett long-run variance.
fn reference_dm(e1: &[f64], e2: &[f64]) -> f64 {
    let d: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let lag = n.cbrt().floor() as usize;
    let autocov = |k: usize| -> f64 {
        d.iter()
            .skip(k)
            .zip(d.iter())
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n
    };
    let weights = (1..=lag).map(|k| 1.0 - k as f64 / (lag as f64 + 1.0));
    let lrv = autocov(0) + 2.0 * weights.zip(1..=lag).map(|(w, k)| w * autocov(k)).sum::<f64>();
    mean / (lrv / n).sqrt()
}

pub fn tests() -> Result<Outcome, BoxError> {
    let e1 = series(50, 0.0);
    let e2: Vec<f64> = series(50, 1.3).iter().map(|x| 1.05 * x).collect();
    let ours = dm_test(&e1, &e2)?;
    let flipped = dm_test(&e2, &e1)?;
    let reference = reference_dm(&e1, &e2);
    let dm_err = (ours.statistic - reference).abs();

    let d = [
        0.5, -1.2, 2.3, 0.7, -0.4, 1.9, -2.8, 0.5, 3.1, -0.9, 1.1, 0.0, -1.5, 2.0, 0.3, -0.6, 1.4, -2.2, 0.8, 1.0,
    ];
    // |d| ranks, ties averaged: the two 0.5s share 3.5 and the zero is dropped.
    let hand = 1.0 + 3.5 + 3.5 + 6.0 + 7.0 + 9.0 + 10.0 + 12.0 + 14.0 + 15.0 + 17.0 + 19.0;
    let w = wilcoxon_test(&d);
    Ok(Outcome::all(vec![
        Outcome::new(dm_err <= 1e-8, format!("DM {:.6} vs reference, diff {dm_err:.1e}", ours.statistic)),
        Outcome::new(
            flipped.statistic == -ours.statistic,
            format!("DM(e2, e1) = {:.6}", flipped.statistic),
        ),
        Outcome::new(w.w_plus == hand && w.n == 19, format!("Wilcoxon W+ {} vs hand {hand} (n {})", w.w_plus, w.n)),
    ]))
}
