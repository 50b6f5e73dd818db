//! Dynamic SABR implied-volatility surface with ν_t, ρ_t on a daily grid.
//!
//! The four time functions are integrals of the form ∫₀ᵀ p(T, t)·f(t) dt with
//! p a polynomial of degree ≤ 2 in t and h(T) = 0 at the upper limit. Their
//! composite trapezoid rule splits into prefix sums Σ ω_j t_jᵏ f_j over the grid,
//! which are built once per parameter vector; each option then costs O(1).

use crate::autodiff::{Tape, Var};

use super::{bsm_price, smooth_floor, SkVars, SkrError, VOL_FLOOR};

/// Number of grid points t_i = i/360, i = 1..360.
pub const SABR_GRID: usize = 360;
const DT: f64 = 1.0 / SABR_GRID as f64;

#[derive(Debug, Clone, Copy)]
pub struct SabrTimeFunctions<'t> {
    pub v1sq: Var<'t>,
    pub v2sq: Var<'t>,
    pub eta1: Var<'t>,
    pub eta2: Var<'t>,
}

/// Prefix sums m[k][J] = Σ_{j ≤ J} ω_j t_jᵏ f_j with ω_0 = Δ/2, ω_j = Δ otherwise.
struct Moments<'t> {
    f: Vec<Var<'t>>,
    m: Vec<Vec<Var<'t>>>,
}

impl<'t> Moments<'t> {
    fn new(f: Vec<Var<'t>>, order: usize) -> Self {
        let m = (0..=order)
            .map(|k| {
                let mut acc = Vec::with_capacity(f.len());
                for (j, &fj) in f.iter().enumerate() {
                    let t = j as f64 * DT;
                    let w = if j == 0 { 0.5 * DT } else { DT } * t.powi(k as i32);
                    acc.push(match acc.last() {
                        None => fj * w,
                        Some(&prev) => prev + fj * w,
                    });
                }
                acc
            })
            .collect();
        Moments { f, m }
    }

    /// Trapezoid Σ_j W_j t_jᵏ f_j up to T, where the last full node J gets the
    /// partial-interval weight.
    fn truncated(&self, k: usize, j: usize, delta: Var<'t>) -> Var<'t> {
        let t = j as f64 * DT;
        let tk = t.powi(k as i32);
        self.m[k][j] + (delta - DT) * (0.5 * tk) * self.f[j]
    }
}

/// ν and ρ curves bound on a tape, ready for repeated pricing.
pub struct SabrCurves<'t> {
    alpha: Var<'t>,
    beta: Var<'t>,
    nu_sq: Moments<'t>,
    nu_rho: Moments<'t>,
    g_sq: Moments<'t>,
}

impl<'t> SabrCurves<'t> {
    pub fn new(alpha: Var<'t>, beta: Var<'t>, nu: &[Var<'t>], rho: &[Var<'t>]) -> Result<Self, SkrError> {
        for (name, v) in [("nu grid", nu), ("rho grid", rho)] {
            if v.len() != SABR_GRID {
                return Err(SkrError::Dimension {
                    repr: name,
                    expected: SABR_GRID,
                    got: v.len(),
                });
            }
        }
        // node 0 at t = 0 repeats the first grid value
        let node = |v: &[Var<'t>], j: usize| v[j.max(1) - 1];
        let nu_sq: Vec<_> = (0..=SABR_GRID).map(|j| node(nu, j).square()).collect();
        let c: Vec<_> = (0..=SABR_GRID).map(|j| node(nu, j) * node(rho, j)).collect();
        let mut g = Vec::with_capacity(c.len());
        g.push(c[0] * 0.0);
        for j in 1..c.len() {
            let prev = g[j - 1];
            g.push(prev + (c[j - 1] + c[j]) * (0.5 * DT));
        }
        let g_sq = g.iter().map(|v| v.square()).collect();
        Ok(SabrCurves {
            alpha,
            beta,
            nu_sq: Moments::new(nu_sq, 2),
            nu_rho: Moments::new(c, 1),
            g_sq: Moments::new(g_sq, 1),
        })
    }

    pub fn tape(&self) -> &'t Tape {
        self.alpha.tape()
    }

    pub fn time_functions(&self, t: Var<'t>) -> Result<SabrTimeFunctions<'t>, SkrError> {
        let tv = t.value();
        if !(tv > 0.0 && tv <= 1.0) {
            return Err(SkrError::Tenor(tv));
        }
        let j = ((tv / DT).floor() as usize).min(SABR_GRID);
        let delta = t - j as f64 * DT;
        let t2 = t.square();
        let t3 = t2 * t;

        let a0 = self.nu_sq.truncated(0, j, delta);
        let a1 = self.nu_sq.truncated(1, j, delta);
        let a2 = self.nu_sq.truncated(2, j, delta);
        let v1 = (t2 * a0 - t * a1 * 2.0 + a2) * 3.0 / t3;
        let v2 = (t * a1 - a2) * 6.0 / t3;

        let c0 = self.nu_rho.truncated(0, j, delta);
        let c1 = self.nu_rho.truncated(1, j, delta);
        let eta1 = (t * c0 - c1) * 2.0 / t2;

        let e0 = self.g_sq.truncated(0, j, delta);
        let e1 = self.g_sq.truncated(1, j, delta);
        let eta2 = (t * e0 - e1) * 12.0 / (t2 * t2);

        Ok(SabrTimeFunctions {
            v1sq: v1,
            v2sq: v2,
            eta1,
            eta2,
        })
    }

    /// σ = (1/w)(1 + A₁ z + A₂ z² + B T), w = f̂^{1−β}/α, z = log(K/f̂).
    pub fn implied_vol(&self, x: &SkVars<'t>) -> Result<Var<'t>, SkrError> {
        let tf = self.time_functions(x.tau)?;
        let (alpha, beta) = (self.alpha, self.beta);
        let fwd = x.s * (x.r * x.tau).exp();
        let one_m_beta = 1.0 - beta;
        let scale = fwd.pow(one_m_beta);
        let w = scale / alpha;
        let z = (x.k / fwd).ln();

        let a1 = (beta - 1.0) * 0.5 + tf.eta1 * w * 0.5;
        let a2 = one_m_beta.square() / 12.0
            + (one_m_beta - tf.eta1 * w) * 0.25
            + (tf.v1sq * 4.0 + (tf.eta2.square() + tf.eta1.square() * 3.0) * 3.0) / 24.0 * w.square();
        let b = (one_m_beta.square() / 24.0 + w * beta * tf.eta1 * 0.25
            + (tf.v2sq * 2.0 - tf.eta2.square() * w.square() * 3.0) / 24.0)
            / w.square();
        let sigma = (a1 * z + a2 * z.square() + b * x.tau + 1.0) * (alpha / scale);
        Ok(smooth_floor(sigma, VOL_FLOOR))
    }

    pub fn price(&self, x: &SkVars<'t>) -> Result<Var<'t>, SkrError> {
        let sigma = self.implied_vol(x)?;
        bsm_price(x, sigma)
    }
}

/// (v₁², v₂², η₁, η₂) at maturity `t`.
pub fn sabr_time_functions<'t>(nu: &[Var<'t>], rho: &[Var<'t>], t: f64) -> Result<SabrTimeFunctions<'t>, SkrError> {
    let tape = nu.first().ok_or(SkrError::Dimension {
        repr: "nu grid",
        expected: SABR_GRID,
        got: 0,
    })?;
    let tape = tape.tape();
    let one = tape.constant(1.0);
    SabrCurves::new(one, one, nu, rho)?.time_functions(tape.constant(t))
}

pub fn sabr_implied_vol<'t>(
    x: &SkVars<'t>,
    alpha: Var<'t>,
    beta: Var<'t>,
    nu: &[Var<'t>],
    rho: &[Var<'t>],
) -> Result<Var<'t>, SkrError> {
    SabrCurves::new(alpha, beta, nu, rho)?.implied_vol(x)
}

pub fn sabr_price<'t>(
    x: &SkVars<'t>,
    alpha: Var<'t>,
    beta: Var<'t>,
    nu: &[Var<'t>],
    rho: &[Var<'t>],
) -> Result<Var<'t>, SkrError> {
    SabrCurves::new(alpha, beta, nu, rho)?.price(x)
}
