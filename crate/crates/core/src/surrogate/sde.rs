use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::rng::{derive_seed, rng_for, stream};
use crate::skr::SkInputs;

use super::SurrogateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SdeModel {
    Hsv,
    Nasv,
}

/// Stochastic-volatility system dS = rS dt + √v S dW¹, dv = κ(v_θ − v)dt + σ_v v^γ dW².
/// `gamma_v` is ignored for [`SdeModel::Hsv`], which always uses γ = ½.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeSpec {
    pub model: SdeModel,
    pub kappa: f64,
    pub v_theta: f64,
    pub sigma_v: f64,
    pub rho: f64,
    pub v0: f64,
    pub gamma_v: f64,
    pub steps_per_year: f64,
    /// Total paths, antithetic pairs included.
    pub paths: usize,
    pub seed: u64,
}

impl SdeSpec {
    pub fn heston(kappa: f64, v_theta: f64, sigma_v: f64, rho: f64, v0: f64) -> Self {
        SdeSpec {
            model: SdeModel::Hsv,
            kappa,
            v_theta,
            sigma_v,
            rho,
            v0,
            gamma_v: 0.5,
            steps_per_year: 250.0,
            paths: 1000,
            seed: 0,
        }
    }

    pub fn nasv(kappa: f64, v_theta: f64, sigma_v: f64, rho: f64, v0: f64, gamma_v: f64) -> Self {
        SdeSpec {
            model: SdeModel::Nasv,
            gamma_v,
            ..SdeSpec::heston(kappa, v_theta, sigma_v, rho, v0)
        }
    }

    pub fn with_paths(mut self, paths: usize) -> Self {
        self.paths = paths;
        self
    }

    pub fn with_steps_per_year(mut self, steps: f64) -> Self {
        self.steps_per_year = steps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn gamma(&self) -> f64 {
        match self.model {
            SdeModel::Hsv => 0.5,
            SdeModel::Nasv => self.gamma_v,
        }
    }

    fn validate(&self) -> Result<(), SurrogateError> {
        let positive = [
            ("kappa", self.kappa),
            ("v_theta", self.v_theta),
            ("sigma_v", self.sigma_v),
            ("v0", self.v0),
            ("steps_per_year", self.steps_per_year),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SurrogateError::Param(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.rho.abs() < 1.0) {
            return Err(SurrogateError::Param(format!("rho = {} must lie in (-1, 1)", self.rho)));
        }
        if self.paths < 2 {
            return Err(SurrogateError::Param("at least one antithetic pair is required".into()));
        }
        Ok(())
    }
}

/// Monte-Carlo price and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPrice {
    pub price: f64,
    pub std_err: f64,
}

#[inline]
fn vol_power(v: f64, gamma: f64) -> f64 {
    if gamma == 0.5 {
        v.sqrt()
    } else {
        v.powf(gamma)
    }
}

const PAIRS_PER_CHUNK: usize = 2048;

struct Chunk {
    sum: f64,
    sum_sq: f64,
    n: usize,
}

/// Full-truncation Euler on log S and v with antithetic pairs. The variance
/// entering drift and diffusion is max(v, 0). Chunks of paths use independent
/// generators, so the result does not depend on the thread count.
pub fn simulate_price(spec: &SdeSpec, x: &SkInputs) -> Result<McPrice, SurrogateError> {
    spec.validate()?;
    let steps = (spec.steps_per_year * x.tau).ceil().max(1.0) as usize;
    let dt = x.tau / steps as f64;
    let sq_dt = dt.sqrt();
    let gamma = spec.gamma();
    let rho_c = (1.0 - spec.rho * spec.rho).sqrt();
    let pairs = spec.paths / 2;
    let n_chunks = pairs.div_ceil(PAIRS_PER_CHUNK);
    let discount = (-x.r * x.tau).exp();

    let chunks: Vec<Result<Chunk, SurrogateError>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(derive_seed(spec.seed, stream::SIMULATION, c as u64), stream::SIMULATION);
            let n = PAIRS_PER_CHUNK.min(pairs - c * PAIRS_PER_CHUNK);
            let mut out = Chunk {
                sum: 0.0,
                sum_sq: 0.0,
                n,
            };
            for _ in 0..n {
                let mut ls = [x.s.ln(); 2];
                let mut v = [spec.v0; 2];
                for step in 0..steps {
                    let z1: f64 = rng.sample(StandardNormal);
                    let zp: f64 = rng.sample(StandardNormal);
                    let z2 = spec.rho * z1 + rho_c * zp;
                    for (a, sign) in [(0usize, 1.0), (1, -1.0)] {
                        let vp = v[a].max(0.0);
                        ls[a] += (x.r - 0.5 * vp) * dt + vp.sqrt() * sq_dt * sign * z1;
                        v[a] += spec.kappa * (spec.v_theta - vp) * dt + spec.sigma_v * vol_power(vp, gamma) * sq_dt * sign * z2;
                        if !(ls[a].is_finite() && v[a].is_finite()) {
                            return Err(SurrogateError::Simulation(format!(
                                "non-finite state at step {step}: log S = {}, v = {}",
                                ls[a], v[a]
                            )));
                        }
                    }
                }
                let pay = 0.5 * ((ls[0].exp() - x.k).max(0.0) + (ls[1].exp() - x.k).max(0.0)) * discount;
                out.sum += pay;
                out.sum_sq += pay * pay;
            }
            Ok(out)
        })
        .collect();

    let (mut sum, mut sum_sq, mut n) = (0.0, 0.0, 0usize);
    for c in chunks {
        let c = c?;
        sum += c.sum;
        sum_sq += c.sum_sq;
        n += c.n;
    }
    let mean = sum / n as f64;
    let var = ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0).max(1.0)).max(0.0);
    Ok(McPrice {
        price: mean,
        std_err: (var / n as f64).sqrt(),
    })
}

/// Terminal log-prices of the first `pairs` antithetic pairs, for path-level comparisons.
pub fn terminal_log_prices(spec: &SdeSpec, x: &SkInputs, pairs: usize) -> Result<Vec<f64>, SurrogateError> {
    let mut s = spec.clone();
    s.paths = 2 * pairs;
    s.validate()?;
    let steps = (s.steps_per_year * x.tau).ceil().max(1.0) as usize;
    let dt = x.tau / steps as f64;
    let sq_dt = dt.sqrt();
    let gamma = s.gamma();
    let rho_c = (1.0 - s.rho * s.rho).sqrt();
    let mut rng = rng_for(derive_seed(s.seed, stream::SIMULATION, 0), stream::SIMULATION);
    let mut out = Vec::with_capacity(2 * pairs);
    for _ in 0..pairs {
        let mut ls = [x.s.ln(); 2];
        let mut v = [s.v0; 2];
        for _ in 0..steps {
            let z1: f64 = rng.sample(StandardNormal);
            let zp: f64 = rng.sample(StandardNormal);
            let z2 = s.rho * z1 + rho_c * zp;
            for (a, sign) in [(0usize, 1.0), (1, -1.0)] {
                let vp = v[a].max(0.0);
                ls[a] += (x.r - 0.5 * vp) * dt + vp.sqrt() * sq_dt * sign * z1;
                v[a] += s.kappa * (s.v_theta - vp) * dt + s.sigma_v * vol_power(vp, gamma) * sq_dt * sign * z2;
            }
        }
        out.extend(ls);
    }
    Ok(out)
}
