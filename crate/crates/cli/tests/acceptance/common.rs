use statrs::distribution::{ContinuousCDF, Normal};

pub type BoxError = Box<dyn std::error::Error>;

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Outcome {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }

    /// Every part must pass; details are joined.
    pub fn all(parts: Vec<Outcome>) -> Outcome {
        Outcome {
            pass: parts.iter().all(|p| p.pass),
            detail: parts.iter().map(|p| p.detail.as_str()).collect::<Vec<_>>().join("; "),
        }
    }
}

pub fn norm_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

/// Black–Scholes call price, written out independently of the library.
pub fn bs_call(s: f64, k: f64, r: f64, tau: f64, sigma: f64) -> f64 {
    let sd = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / sd;
    s * norm_cdf(d1) - k * (-r * tau).exp() * norm_cdf(d1 - sd)
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}
