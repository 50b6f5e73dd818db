use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;

fn phi(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").cdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmResult {
    pub statistic: f64,
    /// P(Z ≤ statistic): small when the first series has the smaller loss.
    pub p_value: f64,
    pub lag: usize,
    /// The long-run variance was not positive.
    pub degenerate: bool,
}

/// Diebold–Mariano test on d = e1 − e2 with a Bartlett-kernel Newey–West
/// variance at lag ⌊n^{1/3}⌋.
pub fn dm_test(e1: &[f64], e2: &[f64]) -> Result<DmResult, EvalError> {
    if e1.len() != e2.len() {
        return Err(EvalError::Length(e1.len(), e2.len()));
    }
    let n = e1.len();
    if n < 10 {
        return Err(EvalError::TooShort {
            what: "Diebold-Mariano test",
            need: 10,
            got: n,
        });
    }
    let d: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = d.iter().map(|x| x - mean).collect();
    let lag = (n as f64).cbrt().floor() as usize;
    let gamma = |k: usize| (k..n).map(|t| c[t] * c[t - k]).sum::<f64>() / n as f64;
    let mut lrv = gamma(0);
    for k in 1..=lag {
        lrv += 2.0 * (1.0 - k as f64 / (lag + 1) as f64) * gamma(k);
    }
    if !(lrv > 0.0) {
        return Ok(DmResult {
            statistic: 0.0,
            p_value: 0.5,
            lag,
            degenerate: true,
        });
    }
    let statistic = mean / (lrv / n as f64).sqrt();
    Ok(DmResult {
        statistic,
        p_value: phi(statistic),
        lag,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub w_plus: f64,
    /// Non-zero differences.
    pub n: usize,
    pub z: f64,
    /// Two-sided normal-approximation p-value.
    pub p_value: f64,
    /// Every difference was zero.
    pub degenerate: bool,
    /// Fewer than ten non-zero differences.
    pub small_sample: bool,
}

/// Wilcoxon signed-rank test with average ranks for ties, a tie-corrected
/// variance and a continuity correction.
pub fn wilcoxon_test(d: &[f64]) -> WilcoxonResult {
    let mut nz: Vec<f64> = d.iter().copied().filter(|x| *x != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return WilcoxonResult {
            w_plus: 0.0,
            n: 0,
            z: 0.0,
            p_value: 1.0,
            degenerate: true,
            small_sample: true,
        };
    }
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut w_plus = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        w_plus += rank * nz[i..=j].iter().filter(|x| **x > 0.0).count() as f64;
        i = j + 1;
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let diff = w_plus - mean;
    let z = if diff == 0.0 || var <= 0.0 {
        0.0
    } else {
        (diff - 0.5 * diff.signum()) / var.sqrt()
    };
    WilcoxonResult {
        w_plus,
        n,
        z,
        p_value: (2.0 * (1.0 - phi(z.abs()))).min(1.0),
        degenerate: false,
        small_sample: n < 10,
    }
}
