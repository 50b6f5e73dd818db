//! Heston and Heston-with-double-exponential-jumps prices by COS inversion.

use std::f64::consts::PI;

use crate::autodiff::{CVar, Var};

use super::{SkInputs, SkVars, SkrError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosConfig {
    pub n: usize,
    pub l: f64,
}

impl Default for CosConfig {
    fn default() -> Self {
        CosConfig { n: 256, l: 12.0 }
    }
}

impl CosConfig {
    pub fn validate(&self) -> Result<(), SkrError> {
        if self.n < 32 {
            return Err(SkrError::Domain {
                what: "COS terms",
                value: self.n as f64,
            });
        }
        if !(self.l > 0.0) {
            return Err(SkrError::Domain {
                what: "COS width",
                value: self.l,
            });
        }
        Ok(())
    }
}

/// Constrained Heston parameters in the order (v_θ, v₀, σ_v, ρ, κ).
#[derive(Debug, Clone, Copy)]
pub struct HestonParams<'t> {
    pub v_theta: Var<'t>,
    pub v0: Var<'t>,
    pub sigma_v: Var<'t>,
    pub rho: Var<'t>,
    pub kappa: Var<'t>,
}

impl<'t> HestonParams<'t> {
    pub fn from_slice(phi: &[Var<'t>]) -> Self {
        HestonParams {
            v_theta: phi[0],
            v0: phi[1],
            sigma_v: phi[2],
            rho: phi[3],
            kappa: phi[4],
        }
    }
}

/// Constrained jump parameters in the order (p, η₁, η₂, λ).
#[derive(Debug, Clone, Copy)]
pub struct JumpParams<'t> {
    pub p: Var<'t>,
    pub eta1: Var<'t>,
    pub eta2: Var<'t>,
    pub lambda: Var<'t>,
}

impl<'t> JumpParams<'t> {
    pub fn from_slice(phi: &[Var<'t>]) -> Self {
        JumpParams {
            p: phi[0],
            eta1: phi[1],
            eta2: phi[2],
            lambda: phi[3],
        }
    }
}

/// C(u)·v_θ + D(u)·v₀ of the Heston characteristic function.
fn heston_exponent<'t>(u: Var<'t>, tau: Var<'t>, h: &HestonParams<'t>) -> CVar<'t> {
    let sv2 = h.sigma_v.square();
    // β = κ − iρσ_v u
    let beta = CVar::new(h.kappa, -(h.rho * h.sigma_v * u));
    // σ_v²(iu + u²)
    let q = CVar::new(sv2 * u.square(), sv2 * u);
    let d = (beta * beta + q).csqrt();
    let plus = beta + d;
    // β − d = (β² − d²)/(β + d) = −σ_v²(iu + u²)/(β + d)
    let minus = (-q).cdiv(plus);
    let g = minus.cdiv(plus);
    let e = (-d.scale(tau)).cexp();
    let one_m_ge = -(g * e).add_c(-1.0, 0.0);
    let one_m_g = -g.add_c(-1.0, 0.0);
    let log_term = one_m_ge.cdiv(one_m_g).clog();
    let c = (minus.scale(tau) - log_term.scale_c(2.0)).scale(h.kappa / sv2);
    let dd = minus.scale(1.0 / sv2) * (-e.add_c(-1.0, 0.0)).cdiv(one_m_ge);
    c.scale(h.v_theta) + dd.scale(h.v0)
}

/// λτ(pη₁/(η₁ − iu) + (1 − p)η₂/(η₂ + iu) − 1).
fn jump_exponent<'t>(u: Var<'t>, tau: Var<'t>, j: &JumpParams<'t>) -> CVar<'t> {
    let u2 = u.square();
    let a = j.eta1.square() + u2;
    let b = j.eta2.square() + u2;
    let q = 1.0 - j.p;
    let re = j.p * j.eta1.square() / a + q * j.eta2.square() / b - 1.0;
    let im = (j.p * j.eta1 / a - q * j.eta2 / b) * u;
    let lt = j.lambda * tau;
    CVar::new(re * lt, im * lt)
}

fn check_jump(j: &JumpParams<'_>) -> Result<(), SkrError> {
    let checks = [
        ("eta1 - 1", j.eta1.value() - 1.0),
        ("eta2", j.eta2.value()),
        ("lambda", j.lambda.value() + f64::MIN_POSITIVE),
    ];
    for (what, v) in checks {
        if !(v > 0.0) {
            return Err(SkrError::Domain { what, value: v });
        }
    }
    let p = j.p.value();
    if !(p > 0.0 && p < 1.0) {
        return Err(SkrError::Domain { what: "p", value: p });
    }
    Ok(())
}

fn check_heston(h: &HestonParams<'_>) -> Result<(), SkrError> {
    let checks = [
        ("v_theta", h.v_theta.value()),
        ("v0", h.v0.value()),
        ("sigma_v", h.sigma_v.value()),
        ("kappa", h.kappa.value()),
    ];
    for (what, v) in checks {
        if !(v > 0.0) {
            return Err(SkrError::Domain { what, value: v });
        }
    }
    let rho = h.rho.value();
    if !(rho.abs() < 1.0) {
        return Err(SkrError::Domain { what: "rho", value: rho });
    }
    Ok(())
}

fn finite_or(z: CVar<'_>, u: f64) -> Result<CVar<'_>, SkrError> {
    let (re, im) = z.value();
    if re.is_finite() && im.is_finite() {
        Ok(z)
    } else {
        Err(SkrError::Overflow(u))
    }
}

/// ψ(u) = exp(C v_θ + D v₀ + iu·log(S e^{rτ})), the characteristic function of log S_T.
pub fn heston_cf<'t>(u: f64, x: &SkVars<'t>, h: &HestonParams<'t>) -> Result<CVar<'t>, SkrError> {
    check_heston(h)?;
    let uv = x.s.tape().constant(u);
    let mut z = heston_exponent(uv, x.tau, h);
    z.im = z.im + (x.s.ln() + x.r * x.tau) * uv;
    finite_or(z.cexp(), u)
}

/// exp(λτ(pη₁/(η₁ − iu) + (1 − p)η₂/(η₂ + iu) − 1)).
pub fn jump_cf<'t>(u: f64, j: &JumpParams<'t>, tau: Var<'t>) -> Result<CVar<'t>, SkrError> {
    check_jump(j)?;
    finite_or(jump_exponent(tau.tape().constant(u), tau, j).cexp(), u)
}

fn heston_cumulant_vars<'t>(tau: Var<'t>, r: Var<'t>, h: &HestonParams<'t>) -> (Var<'t>, Var<'t>) {
    let (theta, v0, s, rho, k) = (h.v_theta, h.v0, h.sigma_v, h.rho, h.kappa);
    let kt = k * tau;
    let e1 = (-kt).exp();
    let e2 = (kt * -2.0).exp();
    let one_m_e1 = -(-kt).exp_m1();
    let one_m_e2 = -(kt * -2.0).exp_m1();
    let dv = v0 - theta;
    let c1 = r * tau + one_m_e1 * (theta - v0) / (k * 2.0) - theta * tau * 0.5;
    // ∫(1 − e^{−κ(τ−t)})^j E[v_t] dt for j = 1, 2
    let i1 = theta * (tau - one_m_e1 / k) + dv * (one_m_e1 / k - tau * e1);
    let i2 = theta * (tau - one_m_e1 * 2.0 / k + one_m_e2 / (k * 2.0)) + dv * (one_m_e1 / k - tau * e1 * 2.0 + (e1 - e2) / k);
    let c2 = theta * tau + dv * one_m_e1 / k + s.square() / (k.square() * 4.0) * i2 - rho * s / k * i1;
    (c1, c2)
}

fn jump_cumulant_vars<'t>(tau: Var<'t>, j: &JumpParams<'t>) -> [Var<'t>; 3] {
    let q = 1.0 - j.p;
    let m1 = j.p / j.eta1 - q / j.eta2;
    let m2 = (j.p / j.eta1.square() + q / j.eta2.square()) * 2.0;
    let m4 = (j.p / j.eta1.square().square() + q / j.eta2.square().square()) * 24.0;
    let lt = j.lambda * tau;
    [lt * m1, lt * m2, lt * m4]
}

/// First two cumulants of log(S_T/S) under Heston.
pub fn heston_cumulants(tau: f64, r: f64, h: &HestonParams<'_>) -> (f64, f64) {
    let tape = h.kappa.tape();
    let mark = tape.checkpoint();
    let (c1, c2) = heston_cumulant_vars(tape.constant(tau), tape.constant(r), h);
    let out = (c1.value(), c2.value());
    tape.truncate(mark);
    out
}

/// First, second and fourth cumulants of the compound-Poisson log-jump over τ.
pub fn jump_cumulants(tau: f64, j: &JumpParams<'_>) -> (f64, f64, f64) {
    let tape = j.p.tape();
    let mark = tape.checkpoint();
    let [c1, c2, c4] = jump_cumulant_vars(tape.constant(tau), j);
    let out = (c1.value(), c2.value(), c4.value());
    tape.truncate(mark);
    out
}

/// Truncation interval c₁ ∓ L√(c₂ + √c₄) for log(S_T/K) as tape values. The
/// Heston part contributes no fourth cumulant; the jumps contribute theirs.
fn interval_vars<'t>(
    x: &SkVars<'t>,
    h: &HestonParams<'t>,
    j: Option<&JumpParams<'t>>,
    l: f64,
) -> Result<(Var<'t>, Var<'t>), SkrError> {
    let (mut c1, mut c2) = heston_cumulant_vars(x.tau, x.r, h);
    let mut c4 = None;
    if let Some(j) = j {
        let [j1, j2, j4] = jump_cumulant_vars(x.tau, j);
        c1 = c1 + j1;
        c2 = c2 + j2;
        c4 = Some(j4);
    }
    if !(c2.value() > 0.0) {
        return Err(SkrError::Domain { what: "c2", value: c2.value() });
    }
    let spread = match c4 {
        Some(c4) if c4.value() > 0.0 => c2 + c4.sqrt(),
        _ => c2,
    };
    let half = spread.sqrt() * l;
    let centre = (x.s / x.k).ln() + c1;
    Ok((centre - half, centre + half))
}

/// Values of the truncation interval used by [`cos_price`].
pub fn cos_interval(
    x: &SkInputs,
    h: &HestonParams<'_>,
    j: Option<&JumpParams<'_>>,
    l: f64,
) -> Result<(f64, f64), SkrError> {
    let tape = h.kappa.tape();
    let mark = tape.checkpoint();
    let out = interval_vars(&x.lift(tape), h, j, l).map(|(a, b)| (a.value(), b.value()));
    tape.truncate(mark);
    out
}

pub fn interval_from_cumulants(c1: f64, c2: f64, c4: f64, l: f64) -> Result<(f64, f64), SkrError> {
    if !(c2 > 0.0) {
        return Err(SkrError::Domain { what: "c2", value: c2 });
    }
    let half = l * (c2 + c4.max(0.0).sqrt()).sqrt();
    Ok((c1 - half, c1 + half))
}

/// ∫_c^d e^y cos(wπ(y − a)/(b − a)) dy.
pub fn cos_chi(w: usize, c: f64, d: f64, a: f64, b: f64) -> f64 {
    let k = w as f64 * PI / (b - a);
    let (sd, cd) = (k * (d - a)).sin_cos();
    let (sc, cc) = (k * (c - a)).sin_cos();
    (cd * d.exp() - cc * c.exp() + k * (sd * d.exp() - sc * c.exp())) / (1.0 + k * k)
}

/// ∫_c^d cos(wπ(y − a)/(b − a)) dy.
pub fn cos_psi(w: usize, c: f64, d: f64, a: f64, b: f64) -> f64 {
    if w == 0 {
        return d - c;
    }
    let k = w as f64 * PI / (b - a);
    ((k * (d - a)).sin() - (k * (c - a)).sin()) / k
}

/// Cosine coefficients of the unit-strike call payoff (e^y − 1)⁺ on [a, b];
/// multiply by K for strike K.
pub fn cos_payoff_coeffs(a: f64, b: f64, n: usize) -> Result<Vec<f64>, SkrError> {
    if n < 1 {
        return Err(SkrError::Domain { what: "N", value: 0.0 });
    }
    if !(a < 0.0 && 0.0 < b) {
        return Err(SkrError::Domain { what: "interval", value: a });
    }
    Ok(call_coeffs(a, b, n))
}

/// Same as [`cos_payoff_coeffs`] for any interval; the payoff is integrated
/// over [max(a, 0), b] and vanishes when b ≤ 0.
fn call_coeffs(a: f64, b: f64, n: usize) -> Vec<f64> {
    if b <= 0.0 {
        return vec![0.0; n];
    }
    let c = a.max(0.0);
    let scale = 2.0 / (b - a);
    (0..n)
        .map(|w| scale * (cos_chi(w, c, b, a, b) - cos_psi(w, c, b, a, b)))
        .collect()
}

/// [`call_coeffs`] on the tape, so the prices follow the interval.
fn call_coeff_vars<'t>(a: Var<'t>, b: Var<'t>, n: usize) -> Vec<Var<'t>> {
    let tape = a.tape();
    if b.value() <= 0.0 {
        return vec![tape.constant(0.0); n];
    }
    let c = if a.value() < 0.0 { tape.constant(0.0) } else { a };
    let width = b - a;
    let scale = 2.0 / width;
    let (eb, ec) = (b.exp(), c.exp());
    (0..n)
        .map(|w| {
            if w == 0 {
                return scale * ((eb - ec) - (b - c));
            }
            let k = (w as f64 * PI) / width;
            // at y = b the phase is wπ
            let sign = if w % 2 == 0 { 1.0 } else { -1.0 };
            let phase = k * (c - a);
            let (sc, cc) = (phase.sin(), phase.cos());
            let chi = (eb * sign - cc * ec - k * sc * ec) / (k.square() + 1.0);
            let psi = -sc / k;
            scale * (chi - psi)
        })
        .collect()
}

/// European call by COS inversion of the Heston (optionally jump-augmented)
/// characteristic function. The interval is recorded on the tape.
pub fn cos_price<'t>(
    x: &SkVars<'t>,
    h: &HestonParams<'t>,
    j: Option<&JumpParams<'t>>,
    cos: &CosConfig,
) -> Result<Var<'t>, SkrError> {
    cos.validate()?;
    check_heston(h)?;
    if let Some(j) = j {
        check_jump(j)?;
    }
    let tau = x.tau.value();
    if !(tau > 0.0) {
        return Err(SkrError::Maturity(tau));
    }
    let (a, b) = interval_vars(x, h, j, cos.l)?;
    let mut weights = call_coeff_vars(a, b, cos.n);
    weights[0] = weights[0] * 0.5;

    // log(S/K) + rτ − a: phase of the log-moneyness CF shifted to the interval
    let shift = (x.s / x.k).ln() + x.r * x.tau - a;
    let width = b - a;
    let mut terms = Vec::with_capacity(cos.n);
    for (w, &weight) in weights.iter().enumerate() {
        let u = (w as f64 * PI) / width;
        let mut z = heston_exponent(u, x.tau, h);
        if let Some(j) = j {
            z = z + jump_exponent(u, x.tau, j);
        }
        z.im = z.im + shift * u;
        terms.push(finite_or(z.cexp(), u.value())?.re * weight);
    }
    let series = x.s.tape().sum(&terms);
    Ok(series * x.k * (-(x.r * x.tau)).exp())
}
