use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use skinn::autodiff::Tape;
use skinn::nn::{Activation, MlpConfig};
use skinn::skr::{
    sabr_implied_vol, skr_price, MopaGrid, ReprId, Representation, SkInputs, SkVars, SABR_GRID,
};
use skinn::surrogate::{
    bsm_surfaces, simulate_price, train_autoencoder, train_surrogate, AeConfig, AeRepr, Bounds, DsnnRepr, SdeSpec,
    SurfaceGrid, SurrogateDataset, SurrogateTrainConfig,
};
use skinn::trainer::{constrained_phi, train_skinn_observed, TrainConfig};
use statrs::function::gamma::ln_gamma;

use crate::common::{bs_call, BoxError, Outcome};

// Cox–Ross–Rubinstein call, summed over terminal nodes in log space.
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

fn price(repr: &Representation, x: [f64; 4], phi: &[f64]) -> Result<f64, BoxError> {
    let tape = Tape::new();
    let xs = SkInputs::new(x[0], x[1], x[2], x[3])?.lift(&tape);
    let p: Vec<_> = phi.iter().map(|&v| tape.constant(v)).collect();
    Ok(skr_price(repr, &xs, &p)?.value())
}

/// Autodiff gradient with respect to (S, K, r, τ) followed by φ.
fn gradient(repr: &Representation, x: [f64; 4], phi: &[f64]) -> Result<Vec<f64>, BoxError> {
    let tape = Tape::new();
    let v = tape.vars(&x)?;
    let xs = SkVars {
        s: v[0],
        k: v[1],
        r: v[2],
        tau: v[3],
    };
    let p = tape.vars(phi)?;
    let out = skr_price(repr, &xs, &p)?;
    let mut all = v;
    all.extend(p);
    Ok(tape.grad(out, &all)?)
}

fn heston_draw(rng: &mut StdRng) -> Vec<f64> {
    vec![
        rng.gen_range(0.02..0.09),
        rng.gen_range(0.02..0.09),
        rng.gen_range(0.2..0.6),
        rng.gen_range(-0.8..-0.1),
        rng.gen_range(1.0..4.0),
    ]
}

pub fn oracles() -> Result<Outcome, BoxError> {
    let mut worst_tree: f64 = 0.0;
    for m in [0.8, 0.9, 1.0, 1.1, 1.2] {
        for tau in [0.1, 0.25, 0.5, 0.75, 1.0] {
            for sigma in [0.1, 0.25, 0.4] {
                let x = [100.0, 100.0 * m, 0.03, tau];
                let p = price(&Representation::Bsm, x, &[sigma])?;
                worst_tree = worst_tree.max((p - crr_call(x[0], x[1], x[2], tau, sigma, 20_000)).abs());
            }
        }
    }
    let hsv = Representation::from_id(ReprId::Hsv)?;
    let hsvj = Representation::from_id(ReprId::Hsvj)?;
    let mut rng = StdRng::seed_from_u64(2024);
    let (mut worst_se, mut worst_jump): (f64, f64) = (0.0, 0.0);
    for draw in 0..10 {
        let phi = heston_draw(&mut rng);
        let x = [100.0, rng.gen_range(90.0..110.0), rng.gen_range(0.0..0.05), rng.gen_range(0.25..1.0)];
        let cos = price(&hsv, x, &phi)?;
        let spec = SdeSpec::heston(phi[4], phi[0], phi[2], phi[3], phi[1])
            .with_paths(200_000)
            .with_steps_per_year(1000.0)
            .with_seed(draw);
        let mc = simulate_price(&spec, &SkInputs::new(x[0], x[1], x[2], x[3])?)?;
        worst_se = worst_se.max((cos - mc.price).abs() / mc.std_err);
        let mut jphi = phi.clone();
        jphi.extend([rng.gen_range(0.2..0.8), rng.gen_range(3.0..15.0), rng.gen_range(3.0..15.0), 0.0]);
        worst_jump = worst_jump.max((price(&hsvj, x, &jphi)? - cos).abs());
    }
    Ok(Outcome::all(vec![
        Outcome::new(worst_tree < 1e-3, format!("BSM vs 20k-step tree max {worst_tree:.2e}")),
        Outcome::new(worst_se < 3.0, format!("COS vs MC max {worst_se:.2} SE")),
        Outcome::new(worst_jump < 1e-10, format!("HSVJ(lambda=0) vs HSV max {worst_jump:.1e}")),
    ]))
}

fn toy_surrogate(bounds: Bounds) -> Result<skinn::surrogate::FrozenSurrogate, BoxError> {
    let d = bounds.len();
    let ds = SurrogateDataset::from_fn(&bounds, 400, 3, |_, x| {
        Ok((1.0 - x[0]).max(0.0) + 0.4 * (x[3] + x[4]).sqrt() * x[1].sqrt() * (1.0 + 0.1 * x[6]))
    })?;
    let cfg = SurrogateTrainConfig {
        epochs: 20,
        batch_size: 64,
        ..SurrogateTrainConfig::new(MlpConfig::new(d, 2, 16).with_activation(Activation::Silu).with_seed(4))
    };
    Ok(train_surrogate(&ds, &cfg)?)
}

fn toy_autoencoder() -> Result<AeRepr, BoxError> {
    let grid = SurfaceGrid::default();
    let sigmas: Vec<f64> = (0..16).map(|i| 0.1 + 0.4 * i as f64 / 15.0).collect();
    let data = bsm_surfaces(&sigmas, 0.01, &grid)?;
    let cfg = AeConfig {
        hidden_layers: 1,
        hidden_width: 16,
        activation: Activation::Silu,
        epochs: 20,
        batch_size: 16,
        ..AeConfig::default()
    };
    Ok(AeRepr::new(train_autoencoder(&data, &grid, &cfg)?))
}

/// A random constrained parameter vector inside the domain of `repr`.
fn random_phi(repr: &Representation, rng: &mut StdRng) -> Vec<f64> {
    let mut u = |a: f64, b: f64| rng.gen_range(a..b);
    match repr.id() {
        ReprId::Bsm => vec![u(0.1, 0.5)],
        ReprId::Absm => vec![u(0.15, 0.3), u(-0.1, 0.1), u(-0.05, 0.05), u(-0.05, 0.05), u(-0.05, 0.05), u(-0.05, 0.05)],
        ReprId::Sabr => {
            let mut v = vec![u(0.1, 0.4), u(0.3, 0.9)];
            v.extend((0..SABR_GRID).map(|_| u(0.2, 0.8)));
            v.extend((0..SABR_GRID).map(|_| u(-0.6, 0.3)));
            v
        }
        ReprId::Hsv | ReprId::DsnnHsv => vec![u(0.02, 0.09), u(0.02, 0.09), u(0.2, 0.6), u(-0.8, -0.1), u(1.0, 4.0)],
        ReprId::Hsvj => vec![
            u(0.02, 0.09),
            u(0.02, 0.09),
            u(0.2, 0.6),
            u(-0.8, -0.1),
            u(1.0, 4.0),
            u(0.2, 0.8),
            u(3.0, 15.0),
            u(3.0, 15.0),
            u(0.1, 1.0),
        ],
        ReprId::DsnnNasv => vec![u(0.02, 0.09), u(0.02, 0.09), u(0.2, 0.6), u(-0.8, -0.1), u(1.0, 4.0), u(0.4, 0.8)],
        ReprId::Mopa => {
            let grid = MopaGrid::default();
            let mut v = Vec::with_capacity(grid.len());
            for _ in 0..grid.rows() {
                let row: Vec<f64> = (0..grid.cols()).map(|_| u(0.0, 1.0)).collect();
                let total: f64 = row.iter().sum();
                v.extend(row.iter().map(|x| x / total));
            }
            v
        }
        ReprId::AeBsm => vec![u(-0.5, 0.5), u(-0.5, 0.5)],
    }
}

/// Richardson-extrapolated central difference.
fn richardson(f: impl Fn(f64) -> Result<f64, BoxError>, x: f64, h: f64) -> Result<f64, BoxError> {
    let d = |h: f64| -> Result<f64, BoxError> { Ok((f(x + h)? - f(x - h)?) / (2.0 * h)) };
    Ok((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
}

pub fn gradients() -> Result<Outcome, BoxError> {
    let reprs = vec![
        Representation::Bsm,
        Representation::Absm,
        Representation::Sabr,
        Representation::from_id(ReprId::Hsv)?,
        Representation::from_id(ReprId::Hsvj)?,
        Representation::Mopa(MopaGrid::default()),
        Representation::Dsnn(Arc::new(DsnnRepr::new(ReprId::DsnnHsv, toy_surrogate(Bounds::heston())?)?)),
        Representation::Dsnn(Arc::new(DsnnRepr::new(ReprId::DsnnNasv, toy_surrogate(Bounds::nasv())?)?)),
        Representation::Autoencoder(Arc::new(toy_autoencoder()?)),
    ];
    let mut rng = StdRng::seed_from_u64(77);
    let mut parts = Vec::new();
    for repr in &reprs {
        let mut worst: f64 = 0.0;
        let mut checked = 0usize;
        for _ in 0..20 {
            let x = [100.0, rng.gen_range(85.0..115.0), rng.gen_range(0.01..0.04), rng.gen_range(0.2..0.9)];
            let phi = random_phi(repr, &mut rng);
            let g = gradient(repr, x, &phi)?;
            for (j, &gj) in g.iter().enumerate() {
                let num = if j < 4 {
                    richardson(
                        |z| {
                            let mut y = x;
                            y[j] = z;
                            price(repr, y, &phi)
                        },
                        x[j],
                        1e-6 * x[j].abs().max(1.0),
                    )?
                } else {
                    let k = j - 4;
                    richardson(
                        |z| {
                            let mut p = phi.clone();
                            p[k] = z;
                            price(repr, x, &p)
                        },
                        phi[k],
                        3e-3 * phi[k].abs().max(0.1),
                    )?
                };
                worst = worst.max((gj - num).abs() / num.abs().max(1e-6));
                checked += 1;
            }
        }
        parts.push(Outcome::new(worst <= 1e-4, format!("{} {checked} partials max rel {worst:.1e}", repr.id())));
    }
    Ok(Outcome::all(parts))
}

pub fn reductions() -> Result<Outcome, BoxError> {
    let tape = Tape::new();
    let nu: Vec<_> = (0..SABR_GRID).map(|_| tape.constant(0.0)).collect();
    let mut sabr_worst: f64 = 0.0;
    for (alpha, k, rho) in [(0.25, 90.0, -0.5), (0.1, 120.0, 0.3), (0.4, 100.0, 0.0), (0.18, 105.0, -0.9)] {
        let x = SkInputs::new(100.0, k, 0.03, 0.5)?.lift(&tape);
        let rho: Vec<_> = (0..SABR_GRID).map(|_| tape.constant(rho)).collect();
        let v = sabr_implied_vol(&x, tape.constant(alpha), tape.constant(1.0), &nu, &rho)?;
        sabr_worst = sabr_worst.max((v.value() - alpha).abs() / alpha);
    }
    let mut absm_worst: f64 = 0.0;
    for k in [80.0, 95.0, 100.0, 110.0, 125.0] {
        for tau in [0.1, 0.5, 1.0] {
            for sigma in [0.15, 0.3] {
                let x = [100.0, k, 0.02, tau];
                let a = price(&Representation::Absm, x, &[sigma, 0.0, 0.0, 0.0, 0.0, 0.0])?;
                let b = price(&Representation::Bsm, x, &[sigma])?;
                absm_worst = absm_worst.max((a - b).abs());
            }
        }
    }
    let x = SkInputs::new(100.0, 100.0, 0.02, 0.5)?;
    let hsv = SdeSpec::heston(2.0, 0.05, 0.6, -0.6, 0.03).with_paths(20_000).with_seed(17);
    let nasv = SdeSpec::nasv(2.0, 0.05, 0.6, -0.6, 0.03, 0.5).with_paths(20_000).with_seed(17);
    let (a, b) = (simulate_price(&hsv, &x)?, simulate_price(&nasv, &x)?);
    let bits = a.price.to_bits() == b.price.to_bits() && a.std_err.to_bits() == b.std_err.to_bits();
    Ok(Outcome::all(vec![
        Outcome::new(sabr_worst <= 4.0 * f64::EPSILON, format!("SABR(beta=1, nu=0) vol rel err {sabr_worst:.1e}")),
        Outcome::new(absm_worst <= 1e-12, format!("ABSM vs BSM max {absm_worst:.1e}")),
        Outcome::new(bits, format!("NASV(gamma=0.5) vs HSV bit-identical: {bits}")),
    ]))
}

pub fn mopa() -> Result<Outcome, BoxError> {
    let grid = MopaGrid::default();
    let repr = Representation::Mopa(grid.clone());
    let panel = skinn::synth::bsm_panel(
        &skinn::synth::PanelSpec {
            days: 5,
            contracts: 40,
            noise: 0.01,
            seed: 3,
            ..Default::default()
        },
        0.2,
    )?;
    let cfg = TrainConfig {
        epochs: 60,
        n_colloc: 256,
        mlp: MlpConfig::new(3, 2, 16),
        ..TrainConfig::new(ReprId::Mopa).with_seed(5)
    };
    let mut worst_sum: f64 = 0.0;
    let mut worst_neg: f64 = 0.0;
    let mut failure = None;
    train_skinn_observed(&cfg, &repr, &panel, |_, raw| match constrained_phi(&repr, raw) {
        Ok(q) => {
            for row in q.chunks(grid.cols()) {
                worst_sum = worst_sum.max((row.iter().sum::<f64>() - 1.0).abs());
                worst_neg = worst_neg.min(row.iter().cloned().fold(f64::INFINITY, f64::min));
            }
        }
        Err(e) => failure = Some(e.to_string()),
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }

    let (s, k, r, tau) = (100.0, 95.0, 0.04, 0.5);
    let h = grid.tenor_index(tau)?;
    let fwd = (r * tau).exp();
    let i = (0..grid.cols())
        .min_by(|&a, &b| (grid.states[a] - fwd).abs().total_cmp(&(grid.states[b] - fwd).abs()))
        .ok_or("empty grid")?;
    let mut q = vec![0.0; grid.len()];
    q[h * grid.cols() + i] = 1.0;
    let point = price(&repr, [s, k, r, tau], &q)?;
    let target = (-r * tau).exp() * (s * fwd - k).max(0.0);
    let gap = s * (grid.states[1] - grid.states[0]);

    let uniform = vec![1.0 / grid.cols() as f64; grid.len()];
    let zero = price(&repr, [100.0, 151.0, 0.02, 0.3], &uniform)?;
    Ok(Outcome::all(vec![
        Outcome::new(
            worst_sum <= 1e-12 && worst_neg >= 0.0,
            format!("{} rows over {} epochs, max |sum-1| {worst_sum:.1e}", grid.rows(), cfg.epochs + 1),
        ),
        Outcome::new(
            (point - target).abs() <= gap,
            format!("point mass {point:.4} vs {target:.4} (gap {gap:.3})"),
        ),
        Outcome::new(zero == 0.0, format!("K above grid price {zero}")),
        Outcome::new(
            (bs_call(100.0, 100.0, 0.03, 0.5, 0.2) - price(&Representation::Bsm, [100.0, 100.0, 0.03, 0.5], &[0.2])?).abs()
                < 1e-10,
            "BSM kernel agrees with the reference formula",
        ),
    ]))
}
