use crate::autodiff::special::norm_cdf;
use crate::autodiff::Var;

use super::{smooth_floor, SkInputs, SkVars, SkrError, VOL_FLOOR};

/// Black–Scholes–Merton call price S·Φ(d₁) − K·e^{−rτ}·Φ(d₂).
pub fn bsm_price<'t>(x: &SkVars<'t>, sigma: Var<'t>) -> Result<Var<'t>, SkrError> {
    if !(x.tau.value() > 0.0) {
        return Err(SkrError::Maturity(x.tau.value()));
    }
    if !(sigma.value() > 0.0) {
        return Err(SkrError::Domain {
            what: "sigma",
            value: sigma.value(),
        });
    }
    let vol = sigma * x.tau.sqrt();
    let d1 = ((x.s / x.k).ln() + (x.r + sigma.square() * 0.5) * x.tau) / vol;
    let d2 = d1 - vol;
    let discount = (-(x.r * x.tau)).exp();
    Ok(x.s * d1.norm_cdf() - x.k * discount * d2.norm_cdf())
}

/// Closed-form Delta Φ(d₁).
pub fn bsm_delta(x: &SkInputs, sigma: f64) -> f64 {
    let vol = sigma * x.tau.sqrt();
    let d1 = ((x.s / x.k).ln() + (x.r + 0.5 * sigma * sigma) * x.tau) / vol;
    norm_cdf(d1)
}

/// α₀ + α₁m + α₂m² + α₃τ + α₄τ² + α₅mτ, smoothly floored.
pub fn absm_vol<'t>(m: Var<'t>, tau: Var<'t>, alpha: &[Var<'t>]) -> Result<Var<'t>, SkrError> {
    if alpha.len() != 6 {
        return Err(SkrError::Dimension {
            repr: "ABSM",
            expected: 6,
            got: alpha.len(),
        });
    }
    let raw = alpha[0] + alpha[1] * m + alpha[2] * m.square() + alpha[3] * tau + alpha[4] * tau.square()
        + alpha[5] * m * tau;
    Ok(smooth_floor(raw, VOL_FLOOR))
}

pub fn absm_price<'t>(x: &SkVars<'t>, alpha: &[Var<'t>]) -> Result<Var<'t>, SkrError> {
    let sigma = absm_vol(x.m(), x.tau, alpha)?;
    bsm_price(x, sigma)
}
