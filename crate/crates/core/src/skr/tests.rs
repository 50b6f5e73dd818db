use super::*;
use crate::autodiff::{CVar, Tape};
use crate::surrogate::{simulate_price, SdeSpec};
use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

// European call on a Cox–Ross–Rubinstein tree, summed over terminal nodes.
fn crr_call(s: f64, k: f64, r: f64, tau: f64, sigma: f64, n: usize) -> f64 {
    let dt = tau / n as f64;
    let u = (sigma * dt.sqrt()).exp();
    let d = 1.0 / u;
    let p = ((r * dt).exp() - d) / (u - d);
    let ln_n = ln_gamma(n as f64 + 1.0);
    let mut total = 0.0;
    for j in 0..=n {
        let st = s * u.powi(j as i32) * d.powi((n - j) as i32);
        if st <= k {
            continue;
        }
        let lw = ln_n - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0)
            + j as f64 * p.ln()
            + (n - j) as f64 * (1.0 - p).ln();
        total += lw.exp() * (st - k);
    }
    total * (-r * tau).exp()
}

fn inputs(s: f64, k: f64, r: f64, tau: f64) -> SkInputs {
    SkInputs::new(s, k, r, tau).unwrap()
}

fn price_of(repr: &Representation, x: SkInputs, phi: &[f64]) -> f64 {
    let tape = Tape::new();
    let xs = x.lift(&tape);
    let p: Vec<_> = phi.iter().map(|&v| tape.constant(v)).collect();
    skr_price(repr, &xs, &p).unwrap().value()
}

fn phi_grad(repr: &Representation, x: SkInputs, phi: &[f64]) -> Vec<f64> {
    let tape = Tape::new();
    let xs = x.lift(&tape);
    let p = tape.vars(phi).unwrap();
    let out = skr_price(repr, &xs, &p).unwrap();
    tape.grad(out, &p).unwrap()
}

fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn heston_phi() -> Vec<f64> {
    // v_theta, v0, sigma_v, rho, kappa
    vec![0.04, 0.04, 0.5, -0.7, 2.0]
}

#[test]
fn bsm_matches_binomial_tree() {
    let oracle = crr_call(100.0, 100.0, 0.05, 1.0, 0.2, 20_000);
    let p = price_of(&Representation::Bsm, inputs(100.0, 100.0, 0.05, 1.0), &[0.2]);
    assert!((p - oracle).abs() < 1e-3, "{p} vs {oracle}");
    assert!((p - 10.4506).abs() < 1e-3);
}

#[test]
fn bsm_limits() {
    let x = inputs(100.0, 100.0, 0.05, 1.0);
    let intrinsic = (100.0 - 100.0 * (-0.05f64).exp()).max(0.0);
    assert!((price_of(&Representation::Bsm, x, &[1e-8]) - intrinsic).abs() < 1e-6);
    let p = price_of(&Representation::Bsm, inputs(100.0, 1e-9, 0.05, 1.0), &[0.2]);
    assert!((p - 100.0).abs() < 1e-6);
}

#[test]
fn bsm_rejects_expired_and_non_positive_vol() {
    let tape = Tape::new();
    let x = SkVars {
        s: tape.constant(100.0),
        k: tape.constant(100.0),
        r: tape.constant(0.0),
        tau: tape.constant(0.0),
    };
    assert!(matches!(bsm_price(&x, tape.constant(0.2)), Err(SkrError::Maturity(_))));
    assert!(SkInputs::new(100.0, 100.0, 0.0, 0.0).is_err());
    let x = inputs(100.0, 100.0, 0.0, 1.0).lift(&tape);
    assert!(bsm_price(&x, tape.constant(0.0)).is_err());
}

#[test]
fn bsm_sigma_gradient_matches_finite_difference() {
    let x = inputs(100.0, 100.0, 0.05, 1.0);
    let g = phi_grad(&Representation::Bsm, x, &[0.2])[0];
    let num = fd(|s| price_of(&Representation::Bsm, x, &[s]), 0.2, 1e-5);
    assert!((g - num).abs() < 1e-6);
}

#[test]
fn bsm_delta_closed_form() {
    let d = bsm_delta(&inputs(100.0, 100.0, 0.05, 1.0), 0.2);
    assert!((d - 0.636831).abs() < 1e-6);
}

#[test]
fn absm_reductions() {
    let x = inputs(100.0, 110.0, 0.02, 0.5);
    let bsm = price_of(&Representation::Bsm, x, &[0.2]);
    let absm = price_of(&Representation::Absm, x, &[0.2, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(bsm, absm);

    let at_m1 = inputs(100.0, 100.0, 0.02, 0.5);
    let p = price_of(&Representation::Absm, at_m1, &[0.2, 0.1, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(p, price_of(&Representation::Bsm, at_m1, &[0.3]));
}

#[test]
fn absm_alpha3_gradient() {
    let x = inputs(100.0, 95.0, 0.03, 0.75);
    let phi = [0.2, 0.05, -0.02, 0.03, 0.01, -0.01];
    let g = phi_grad(&Representation::Absm, x, &phi)[3];
    let num = fd(
        |a| {
            let mut p = phi;
            p[3] = a;
            price_of(&Representation::Absm, x, &p)
        },
        phi[3],
        1e-5,
    );
    assert!((g - num).abs() < 1e-6);
}

#[test]
fn absm_vol_is_floored() {
    reset_floor_hits();
    let tape = Tape::new();
    let alpha: Vec<_> = [-0.5, 0.0, 0.0, 0.0, 0.0, 0.0].iter().map(|&v| tape.constant(v)).collect();
    let v = absm_vol(tape.constant(1.0), tape.constant(0.5), &alpha).unwrap();
    assert!(v.value() >= VOL_FLOOR);
    assert_eq!(floor_hits(), 1);
}

fn const_grid(tape: &Tape, v: f64) -> Vec<Var<'_>> {
    (0..SABR_GRID).map(|_| tape.constant(v)).collect()
}

#[test]
fn sabr_constant_curves() {
    let tape = Tape::new();
    let (nu0, rho0) = (0.6, -0.4);
    let nu = const_grid(&tape, nu0);
    let rho = const_grid(&tape, rho0);
    for t in [0.25, 0.5, 0.73, 1.0] {
        let f = sabr_time_functions(&nu, &rho, t).unwrap();
        assert!((f.v1sq.value() / (nu0 * nu0) - 1.0).abs() < 1e-4, "t={t}");
        assert!((f.eta1.value() - nu0 * rho0).abs() < 1e-4, "t={t}");
    }
}

#[test]
fn sabr_v1_against_exponential_antiderivative() {
    let tape = Tape::new();
    let (nu0, b) = (0.8, 1.5);
    let nu: Vec<_> = (1..=SABR_GRID)
        .map(|i| tape.constant(nu0 * (-b * i as f64 / SABR_GRID as f64).exp()))
        .collect();
    let rho = const_grid(&tape, 0.0);
    for t in [0.3, 0.6, 1.0] {
        // 3/T³ ∫₀ᵀ (T − s)² ν₀² e^{−cs} ds with c = 2b
        let c = 2.0 * b;
        let integral = t * t / c - 2.0 * t / (c * c) + 2.0 / (c * c * c) - (-c * t).exp() * 2.0 / (c * c * c);
        let exact = 3.0 / (t * t * t) * nu0 * nu0 * integral;
        let got = sabr_time_functions(&nu, &rho, t).unwrap().v1sq.value();
        assert!((got / exact - 1.0).abs() < 1e-4, "t={t}: {got} vs {exact}");
    }
}

#[test]
fn sabr_rejects_tenor_outside_unit_interval() {
    let tape = Tape::new();
    let nu = const_grid(&tape, 0.5);
    assert!(matches!(sabr_time_functions(&nu, &nu, 1.5), Err(SkrError::Tenor(_))));
    assert!(matches!(sabr_time_functions(&nu, &nu, 0.0), Err(SkrError::Tenor(_))));
}

#[test]
fn sabr_lognormal_reduction() {
    let tape = Tape::new();
    let nu = const_grid(&tape, 0.0);
    for (alpha, k, rho) in [(0.25, 90.0, -0.5), (0.1, 120.0, 0.3), (0.4, 100.0, 0.0)] {
        let x = inputs(100.0, k, 0.03, 0.5).lift(&tape);
        let rho = const_grid(&tape, rho);
        let v = sabr_implied_vol(&x, tape.constant(alpha), tape.constant(1.0), &nu, &rho).unwrap();
        assert_eq!(v.value(), alpha);
    }
}

#[test]
fn sabr_atm_keeps_only_time_term() {
    let tape = Tape::new();
    let (alpha, beta, nu0, rho0) = (0.3, 0.6, 0.5, -0.3);
    let nu = const_grid(&tape, nu0);
    let rho = const_grid(&tape, rho0);
    let (s, r, tau) = (1.0, 0.02, 0.5);
    let fwd = s * (r * tau as f64).exp();
    let x = inputs(s, fwd, r, tau).lift(&tape);
    let vol = sabr_implied_vol(&x, tape.constant(alpha), tape.constant(beta), &nu, &rho).unwrap().value();
    let tf = sabr_time_functions(&nu, &rho, tau).unwrap();
    let (e1, e2, v2) = (tf.eta1.value(), tf.eta2.value(), tf.v2sq.value());
    let w = fwd.powf(1.0 - beta) / alpha;
    let b = ((1.0 - beta).powi(2) / 24.0 + w * beta * e1 / 4.0 + (2.0 * v2 - 3.0 * e2 * e2 * w * w) / 24.0) / (w * w);
    assert!((vol - (1.0 + b * tau) / w).abs() < 1e-12);
}

fn sabr_phi() -> Vec<f64> {
    let mut phi = vec![0.25, 0.7];
    phi.extend((0..SABR_GRID).map(|i| 0.4 + 0.2 * (i as f64 / 60.0).sin()));
    phi.extend((0..SABR_GRID).map(|i| -0.3 + 0.1 * (i as f64 / 90.0).cos()));
    phi
}

#[test]
fn sabr_nu_gradient_matches_finite_difference() {
    let x = inputs(1.0, 1.1, 0.02, 0.8);
    let phi = sabr_phi();
    let j = 2 + 179;
    let g = phi_grad(&Representation::Sabr, x, &phi)[j];
    let num = fd(
        |v| {
            let mut p = phi.clone();
            p[j] = v;
            price_of(&Representation::Sabr, x, &p)
        },
        phi[j],
        1e-5,
    );
    assert!((g - num).abs() < 1e-5, "{g} vs {num}");
}

fn heston_vars<'t>(tape: &'t Tape, phi: &[f64]) -> Vec<Var<'t>> {
    phi.iter().map(|&v| tape.constant(v)).collect()
}

#[test]
fn heston_cf_normalisation_and_symmetry() {
    let tape = Tape::new();
    let phi = heston_vars(&tape, &heston_phi());
    let h = HestonParams::from_slice(&phi);
    let x = inputs(100.0, 100.0, 0.03, 0.5).lift(&tape);
    let (re, im) = heston_cf(0.0, &x, &h).unwrap().value();
    assert!((re - 1.0).abs() < 1e-15 && im.abs() < 1e-15);
    for u in [0.3, 1.0, 4.0, 17.0] {
        let (a, b) = heston_cf(u, &x, &h).unwrap().value();
        let (c, d) = heston_cf(-u, &x, &h).unwrap().value();
        assert!((a - c).abs() < 1e-12 && (b + d).abs() < 1e-12, "u={u}");
    }
}

#[test]
fn heston_cf_approaches_lognormal() {
    let tape = Tape::new();
    let phi = heston_vars(&tape, &[0.04, 0.04, 1e-4, 0.0, 500.0]);
    let h = HestonParams::from_slice(&phi);
    let (s, r, tau) = (100.0, 0.05, 1.0);
    let x = inputs(s, s, r, tau).lift(&tape);
    for i in 0..=50 {
        let u = i as f64;
        let (re, im) = heston_cf(u, &x, &h).unwrap().value();
        let modulus = (re * re + im * im).sqrt();
        let bsm = (-0.5 * 0.04 * u * u * tau).exp();
        assert!((modulus - bsm).abs() < 1e-4, "u={u}");
    }
}

#[test]
fn jump_cf_examples() {
    let tape = Tape::new();
    let tau = tape.constant(0.7);
    let off = heston_vars(&tape, &[0.4, 8.0, 5.0, 0.0]);
    let (re, im) = jump_cf(3.0, &JumpParams::from_slice(&off), tau).unwrap().value();
    assert_eq!((re, im), (1.0, 0.0));
    let on = heston_vars(&tape, &[0.4, 8.0, 5.0, 0.3]);
    let (re, im) = jump_cf(0.0, &JumpParams::from_slice(&on), tau).unwrap().value();
    assert!((re - 1.0).abs() < 1e-15 && im.abs() < 1e-15);
    let bad = heston_vars(&tape, &[0.4, 1.0, 5.0, 0.3]);
    assert!(jump_cf(1.0, &JumpParams::from_slice(&bad), tau).is_err());
}

#[test]
fn jump_cf_p_gradient() {
    let eval = |p: f64| {
        let tape = Tape::new();
        let pv = tape.var(p).unwrap();
        let rest = heston_vars(&tape, &[8.0, 5.0, 0.3]);
        let j = JumpParams::from_slice(&[pv, rest[0], rest[1], rest[2]]);
        let z = jump_cf(2.0, &j, tape.constant(0.7)).unwrap();
        let (re, im) = z.value();
        let g = tape.grad(z.re, &[pv]).unwrap()[0];
        let gi = tape.grad(z.im, &[pv]).unwrap()[0];
        (re, im, g, gi)
    };
    let (_, _, g, gi) = eval(0.4);
    let h = 1e-5;
    let (r1, i1, _, _) = eval(0.4 + h);
    let (r0, i0, _, _) = eval(0.4 - h);
    assert!((g - (r1 - r0) / (2.0 * h)).abs() < 1e-6);
    assert!((gi - (i1 - i0) / (2.0 * h)).abs() < 1e-6);
}

#[test]
fn cos_interval_examples() {
    let (a, b) = interval_from_cumulants(0.03, 0.04, 0.0, 12.0).unwrap();
    assert!((a + 2.37).abs() < 1e-12 && (b - 2.43).abs() < 1e-12);
    assert!(((b - 0.03) - (0.03 - a)).abs() < 1e-15);
    assert!(interval_from_cumulants(0.0, 0.0, 0.0, 12.0).is_err());
}

fn log_cf(u: f64, phi: &[f64], tau: f64, r: f64) -> (f64, f64) {
    let tape = Tape::new();
    let p = heston_vars(&tape, phi);
    let x = inputs(1.0, 1.0, r, tau).lift(&tape);
    let (re, im) = heston_cf(u, &x, &HestonParams::from_slice(&p)).unwrap().value();
    (0.5 * (re * re + im * im).ln(), im.atan2(re))
}

#[test]
fn heston_cumulants_match_cf_derivatives() {
    let phi = heston_phi();
    let (tau, r, h) = (0.8, 0.03, 1e-3);
    let f = |u: f64| log_cf(u, &phi, tau, r);
    let (fp2, fp1, f0, fm1, fm2) = (f(2.0 * h), f(h), f(0.0), f(-h), f(-2.0 * h));
    // log ψ(u) = i c₁ u − c₂ u²/2 + …
    let c1 = (-fp2.1 + 8.0 * fp1.1 - 8.0 * fm1.1 + fm2.1) / (12.0 * h);
    let c2 = -(-fp2.0 + 16.0 * fp1.0 - 30.0 * f0.0 + 16.0 * fm1.0 - fm2.0) / (12.0 * h * h);
    let tape = Tape::new();
    let p = heston_vars(&tape, &phi);
    let (k1, k2) = heston_cumulants(tau, r, &HestonParams::from_slice(&p));
    assert!((k1 / c1 - 1.0).abs() < 1e-3, "{k1} vs {c1}");
    assert!((k2 / c2 - 1.0).abs() < 1e-3, "{k2} vs {c2}");
}

#[test]
fn payoff_coefficient_branches() {
    let (a, b) = (-2.0, 3.0);
    assert_eq!(cos_psi(0, 0.0, b, a, b), b);
    assert!((cos_chi(0, 0.0, b, a, b) - (b.exp() - 1.0)).abs() < 1e-12);
    assert!(cos_payoff_coeffs(0.5, 1.0, 16).is_err());
    assert!(cos_payoff_coeffs(a, b, 0).is_err());
}

fn reconstruct(a: f64, b: f64, n: usize, x: f64) -> f64 {
    let v = cos_payoff_coeffs(a, b, n).unwrap();
    v.iter()
        .enumerate()
        .map(|(w, c)| {
            let weight = if w == 0 { 0.5 } else { 1.0 };
            weight * c * (w as f64 * std::f64::consts::PI * (x - a) / (b - a)).cos()
        })
        .sum()
}

#[test]
fn payoff_series_reconstructs_the_call_payoff() {
    let exact = 0.1f64.exp() - 1.0;
    assert!((reconstruct(-0.2, 0.2, 256, 0.1) - exact).abs() < 1e-6);
    // the kink at b limits the series to second-order convergence on wide intervals
    let e256 = (reconstruct(-2.37, 2.43, 256, 0.1) - exact).abs();
    let e1024 = (reconstruct(-2.37, 2.43, 1024, 0.1) - exact).abs();
    assert!(e256 < 2e-4 && e1024 < e256 / 8.0, "{e256} {e1024}");
}

#[test]
fn hsvj_without_jumps_equals_hsv() {
    let hsv = Representation::from_id(ReprId::Hsv).unwrap();
    let hsvj = Representation::from_id(ReprId::Hsvj).unwrap();
    for (k, tau) in [(80.0, 0.2), (100.0, 0.5), (125.0, 1.0)] {
        let x = inputs(100.0, k, 0.03, tau);
        let mut phi = heston_phi();
        let a = price_of(&hsv, x, &phi);
        phi.extend([0.4, 8.0, 5.0, 0.0]);
        let b = price_of(&hsvj, x, &phi);
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn heston_near_lognormal_limit_matches_bsm() {
    let hsv = Representation::from_id(ReprId::Hsv).unwrap();
    for k in [90.0, 100.0, 110.0] {
        let x = inputs(100.0, k, 0.05, 1.0);
        let h = price_of(&hsv, x, &[0.04, 0.04, 1e-4, 0.0, 500.0]);
        let b = price_of(&Representation::Bsm, x, &[0.2]);
        assert!((h - b).abs() < 1e-3, "K={k}: {h} vs {b}");
    }
}

#[test]
fn heston_cos_matches_monte_carlo() {
    let hsv = Representation::from_id(ReprId::Hsv).unwrap();
    let x = inputs(100.0, 100.0, 0.03, 0.5);
    let cos = price_of(&hsv, x, &heston_phi());
    let spec = SdeSpec::heston(2.0, 0.04, 0.5, -0.7, 0.04)
        .with_paths(200_000)
        .with_steps_per_year(1000.0)
        .with_seed(11);
    let mc = simulate_price(&spec, &x).unwrap();
    assert!((cos - mc.price).abs() < 3.0 * mc.std_err, "cos {cos}, mc {} ± {}", mc.price, mc.std_err);
}

fn one_hot<'t>(tape: &'t Tape, grid: &MopaGrid, h: usize, i: usize) -> Vec<Var<'t>> {
    (0..grid.len())
        .map(|n| tape.constant(if n == h * grid.cols() + i { 1.0 } else { 0.0 }))
        .collect()
}

#[test]
fn mopa_point_mass() {
    let grid = MopaGrid::default();
    let tape = Tape::new();
    let (s, k, r, tau) = (100.0, 95.0, 0.04, 0.5);
    let h = grid.tenor_index(tau).unwrap();
    let fwd_state = (r * tau as f64).exp();
    let i = (0..grid.cols())
        .min_by(|&a, &b| (grid.states[a] - fwd_state).abs().total_cmp(&(grid.states[b] - fwd_state).abs()))
        .unwrap();
    let q = one_hot(&tape, &grid, h, i);
    let x = inputs(s, k, r, tau).lift(&tape);
    let p = mopa_price(&x, &grid, &q).unwrap().value();
    let target = (-r * tau).exp() * (s * (r * tau).exp() - k).max(0.0);
    let cell = s * (grid.states[1] - grid.states[0]);
    assert!((p - target).abs() <= cell, "{p} vs {target}");
}

#[test]
fn mopa_zero_payoff_above_grid() {
    let grid = MopaGrid::default();
    let tape = Tape::new();
    let q: Vec<_> = (0..grid.len()).map(|_| tape.constant(1.0 / grid.cols() as f64)).collect();
    let x = inputs(100.0, 151.0, 0.02, 0.3).lift(&tape);
    assert_eq!(mopa_price(&x, &grid, &q).unwrap().value(), 0.0);
}

#[test]
fn mopa_uniform_rows_by_direct_summation() {
    let grid = MopaGrid::default();
    let repr = Representation::Mopa(grid.clone());
    let tape = Tape::new();
    let raw: Vec<_> = (0..grid.len()).map(|_| tape.constant(0.0)).collect();
    let q = repr.transform(&raw).unwrap();
    let x = inputs(100.0, 100.0, 0.0, 0.1).lift(&tape);
    let p = mopa_price(&x, &grid, &q).unwrap().value();
    let oracle: f64 = (0..200)
        .map(|i| (50.0 + 100.0 * i as f64 / 199.0 - 100.0).max(0.0))
        .sum::<f64>()
        / 200.0;
    assert!((p - oracle).abs() < 1e-10);
    assert!((p - 12.5628).abs() < 1e-4);
}

#[test]
fn mopa_rejects_tenor_outside_grid() {
    let grid = MopaGrid::default();
    assert!(grid.tenor_index(1.2).is_err());
    assert_eq!(grid.tenor_index(0.04).unwrap(), 0);
    assert_eq!(grid.tenor_index(0.96).unwrap(), 9);
}

#[test]
fn transform_examples() {
    let tape = Tape::new();
    let zero = [tape.constant(0.0)];
    let sigma = Representation::Bsm.transform(&zero).unwrap()[0].value();
    assert!((sigma - 2f64.ln()).abs() < 1e-15);

    let grid = MopaGrid::default();
    let raw: Vec<_> = (0..grid.len()).map(|_| tape.constant(0.37)).collect();
    let q = Representation::Mopa(grid.clone()).transform(&raw).unwrap();
    for row in q.chunks(grid.cols()) {
        let total: f64 = row.iter().map(|v| v.value()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((row[0].value() - 1.0 / 200.0).abs() < 1e-15);
    }

    let mut raw: Vec<_> = (0..5).map(|_| tape.constant(0.0)).collect();
    raw[3] = tape.constant(20.0);
    let rho = Representation::from_id(ReprId::Hsv).unwrap().transform(&raw).unwrap()[3].value();
    assert!(rho < 1.0 && 1.0 - rho < 1e-8);
}

#[test]
fn transform_rejects_wrong_length() {
    let tape = Tape::new();
    let raw = [tape.constant(0.0), tape.constant(1.0)];
    assert!(matches!(
        Representation::Bsm.transform(&raw),
        Err(SkrError::Dimension { expected: 1, got: 2, .. })
    ));
}

#[test]
fn raw_init_maps_to_start_values() {
    let tape = Tape::new();
    let check = |id: ReprId, want: &[(usize, f64)]| {
        let repr = Representation::from_id(id).unwrap();
        let raw: Vec<_> = repr.raw_init().iter().map(|&v| tape.constant(v)).collect();
        let phi = repr.transform(&raw).unwrap();
        for &(i, v) in want {
            assert!((phi[i].value() - v).abs() < 1e-9, "{id} slot {i}");
        }
    };
    check(ReprId::Bsm, &[(0, 0.2)]);
    check(ReprId::Hsv, &[(0, 0.04), (1, 0.04), (2, 0.5), (3, -0.5), (4, 2.0)]);
    check(ReprId::Hsvj, &[(5, 0.5), (6, 10.0), (7, 5.0), (8, 0.1)]);
    check(ReprId::Sabr, &[(0, 0.2), (1, 0.5), (2, 0.5), (2 + SABR_GRID, -0.3)]);
}

#[test]
fn repr_ids_and_dimensions() {
    let dims: Vec<usize> = ReprId::ALL.iter().map(|r| r.dim()).collect();
    assert_eq!(dims, vec![1, 6, 722, 5, 9, 2000, 5, 6, 2]);
    for id in ReprId::ALL {
        assert_eq!(ReprId::parse(id.name()).unwrap(), id);
        if let Ok(repr) = Representation::from_id(id) {
            assert_eq!(repr.dim(), id.dim());
            assert_eq!(repr.raw_init().len(), id.dim());
            assert_eq!(param_names(&repr).len(), id.dim());
        }
    }
    assert!(matches!(ReprId::parse("CEV"), Err(SkrError::UnknownRepr(_))));
    assert!(Representation::from_id(ReprId::DsnnHsv).is_err());
}

#[test]
fn dispatch_matches_direct_kernels() {
    let tape = Tape::new();
    let x = inputs(100.0, 105.0, 0.01, 0.4).lift(&tape);
    let sigma = tape.constant(0.25);
    let direct = bsm_price(&x, sigma).unwrap().value();
    let via = skr_price(&Representation::Bsm, &x, &[sigma]).unwrap().value();
    assert_eq!(direct, via);
}

#[test]
fn input_gradients_match_finite_differences() {
    let hsv = Representation::from_id(ReprId::Hsv).unwrap();
    let phi = heston_phi();
    let base = [100.0, 97.0, 0.03, 0.6];
    let tape = Tape::new();
    let v = tape.vars(&base).unwrap();
    let x = SkVars {
        s: v[0],
        k: v[1],
        r: v[2],
        tau: v[3],
    };
    let p: Vec<_> = phi.iter().map(|&c| tape.constant(c)).collect();
    let out = skr_price(&hsv, &x, &p).unwrap();
    let g = tape.grad(out, &v).unwrap();
    for i in 0..4 {
        let h = 1e-5 * base[i].abs().max(1.0);
        let num = fd(
            |z| {
                let mut b = base;
                b[i] = z;
                price_of(&hsv, inputs(b[0], b[1], b[2], b[3]), &phi)
            },
            base[i],
            h,
        );
        assert!((g[i] - num).abs() <= 1e-4 * (1.0 + num.abs()), "input {i}: {} vs {num}", g[i]);
    }
}

fn raw_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cf_is_normalised_for_any_constrained_parameters(raw in raw_strategy(9), tau in 0.05f64..1.0) {
        let tape = Tape::new();
        let hsvj = Representation::from_id(ReprId::Hsvj).unwrap();
        let r: Vec<_> = raw.iter().map(|&v| tape.constant(v)).collect();
        let phi = hsvj.transform(&r).unwrap();
        let x = inputs(100.0, 100.0, 0.02, tau).lift(&tape);
        let z = heston_cf(0.0, &x, &HestonParams::from_slice(&phi[..5])).unwrap();
        let (re, im) = z.value();
        prop_assert!((re - 1.0).abs() < 1e-10 && im.abs() < 1e-10);
        let j: CVar = jump_cf(0.0, &JumpParams::from_slice(&phi[5..]), x.tau).unwrap();
        let (re, im) = (z * j).value();
        prop_assert!((re - 1.0).abs() < 1e-10 && im.abs() < 1e-10);
    }

    #[test]
    fn constrained_values_stay_in_domain(raw in raw_strategy(9), big in -40.0f64..40.0) {
        let tape = Tape::new();
        let mut raw = raw;
        raw[3] = big;
        raw[5] = big;
        let r: Vec<_> = raw.iter().map(|&v| tape.constant(v)).collect();
        let phi: Vec<f64> = Representation::from_id(ReprId::Hsvj).unwrap().transform(&r).unwrap()
            .iter().map(|v| v.value()).collect();
        prop_assert!(phi[0] > 0.0 && phi[1] > 0.0 && phi[2] > 0.0 && phi[4] > 0.0);
        prop_assert!(phi[3] > -1.0 && phi[3] < 1.0);
        prop_assert!(phi[5] > 0.0 && phi[5] < 1.0);
        prop_assert!(phi[6] > 1.0 && phi[7] > 0.0 && phi[8] > 0.0);
    }

    #[test]
    fn mopa_rows_are_probability_vectors(raw in prop::collection::vec(-30.0f64..30.0, 2000)) {
        let tape = Tape::new();
        let grid = MopaGrid::default();
        let r: Vec<_> = raw.iter().map(|&v| tape.constant(v)).collect();
        let q = Representation::Mopa(grid.clone()).transform(&r).unwrap();
        for row in q.chunks(grid.cols()) {
            prop_assert!(row.iter().all(|v| v.value() >= 0.0));
            let total: f64 = row.iter().map(|v| v.value()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn call_prices_fall_with_strike_and_respect_bounds(
        sigma in 0.05f64..0.8, tau in 0.05f64..1.0, r in 0.0f64..0.08,
        v_theta in 0.01f64..0.25, v0 in 0.01f64..0.25, sigma_v in 0.05f64..1.0,
        rho in -0.95f64..0.0, kappa in 0.5f64..5.0
    ) {
        let s = 100.0;
        let hsv = Representation::from_id(ReprId::Hsv).unwrap();
        let phi = vec![v_theta, v0, sigma_v, rho, kappa];
        for (repr, p) in [(Representation::Bsm, vec![sigma]), (hsv, phi)] {
            let mut prev = f64::INFINITY;
            for i in 0..50 {
                let k = 50.0 + 2.0 * i as f64;
                let c = price_of(&repr, inputs(s, k, r, tau), &p);
                let intrinsic = (s - k * (-r * tau).exp()).max(0.0);
                prop_assert!(c <= prev + 1e-8, "{:?} K={k}", repr.id());
                prop_assert!(c >= intrinsic - 1e-8 && c <= s + 1e-8, "{:?} K={k}: {c}", repr.id());
                prev = c;
            }
        }
    }
}
