use crate::autodiff::special::softplus_inv;
use crate::autodiff::Var;

use super::{MopaGrid, ReprId, Representation, SkrError, SABR_GRID};

// keeps saturated correlations and probabilities strictly inside their open intervals
const EDGE: f64 = 1e-12;

fn positive(v: Var<'_>) -> Var<'_> {
    v.softplus()
}

fn correlation(v: Var<'_>) -> Var<'_> {
    v.tanh() * (1.0 - EDGE)
}

fn probability(v: Var<'_>) -> Var<'_> {
    v.sigmoid() * (1.0 - 2.0 * EDGE) + EDGE
}

fn correlation_inv(rho: f64) -> f64 {
    (rho / (1.0 - EDGE)).atanh()
}

fn probability_inv(p: f64) -> f64 {
    let s = (p - EDGE) / (1.0 - 2.0 * EDGE);
    (s / (1.0 - s)).ln()
}

fn heston<'t>(raw: &[Var<'t>]) -> Vec<Var<'t>> {
    vec![
        positive(raw[0]),
        positive(raw[1]),
        positive(raw[2]),
        correlation(raw[3]),
        positive(raw[4]),
    ]
}

fn softmax_rows<'t>(raw: &[Var<'t>], cols: usize) -> Vec<Var<'t>> {
    let mut out = Vec::with_capacity(raw.len());
    for row in raw.chunks(cols) {
        let top = row.iter().map(|v| v.value()).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<Var<'t>> = row.iter().map(|&v| (v - top).exp()).collect();
        let total = row[0].tape().sum(&e);
        out.extend(e.into_iter().map(|v| v / total));
    }
    out
}

pub(super) fn transform<'t>(repr: &Representation, raw: &[Var<'t>]) -> Result<Vec<Var<'t>>, SkrError> {
    repr.check_dim(raw.len())?;
    Ok(match repr {
        Representation::Bsm => vec![positive(raw[0])],
        Representation::Absm => raw.to_vec(),
        Representation::Hsv(_) => heston(raw),
        Representation::Hsvj(_) => {
            let mut phi = heston(&raw[..5]);
            phi.push(probability(raw[5]));
            phi.push(positive(raw[6]) + 1.0);
            phi.push(positive(raw[7]));
            phi.push(positive(raw[8]));
            phi
        }
        Representation::Sabr => {
            let mut phi = vec![positive(raw[0]), raw[1].sigmoid()];
            phi.extend(raw[2..2 + SABR_GRID].iter().map(|&v| positive(v)));
            phi.extend(raw[2 + SABR_GRID..].iter().map(|&v| correlation(v)));
            phi
        }
        Representation::Mopa(grid) => softmax_rows(raw, grid.cols()),
        Representation::Dsnn(d) => d.transform(raw),
        Representation::Autoencoder(ae) => ae.transform(raw),
    })
}

const HESTON_START: [f64; 5] = [0.04, 0.04, 0.5, -0.5, 2.0];

fn heston_init() -> Vec<f64> {
    let [vt, v0, sv, rho, k] = HESTON_START;
    vec![
        softplus_inv(vt),
        softplus_inv(v0),
        softplus_inv(sv),
        correlation_inv(rho),
        softplus_inv(k),
    ]
}

/// Starting raw vector: σ = 0.2 for BSM and ABSM; Heston (v_θ, v₀, σ_v, ρ, κ) =
/// (0.04, 0.04, 0.5, −0.5, 2); jumps (p, η₁, η₂, λ) = (0.5, 10, 5, 0.1); SABR
/// α = 0.2, β = 0.5, ν ≡ 0.5, ρ ≡ −0.3; MOPA uniform rows.
pub(super) fn init(repr: &Representation) -> Vec<f64> {
    match repr {
        Representation::Bsm => vec![softplus_inv(0.2)],
        Representation::Absm => vec![0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        Representation::Hsv(_) => heston_init(),
        Representation::Hsvj(_) => {
            let mut raw = heston_init();
            raw.extend([probability_inv(0.5), softplus_inv(9.0), softplus_inv(5.0), softplus_inv(0.1)]);
            raw
        }
        Representation::Sabr => {
            let mut raw = vec![softplus_inv(0.2), 0.0];
            raw.extend(std::iter::repeat(softplus_inv(0.5)).take(SABR_GRID));
            raw.extend(std::iter::repeat(correlation_inv(-0.3)).take(SABR_GRID));
            raw
        }
        Representation::Mopa(grid) => vec![0.0; grid.len()],
        Representation::Dsnn(d) => d.raw_init(),
        Representation::Autoencoder(ae) => ae.raw_init(),
    }
}

/// Raw coordinates to constrained parameters for `repr`.
pub fn param_transform<'t>(repr: &Representation, raw: &[Var<'t>]) -> Result<Vec<Var<'t>>, SkrError> {
    repr.transform(raw)
}

pub fn raw_init(repr: &Representation) -> Vec<f64> {
    repr.raw_init()
}

/// Human-readable name of every constrained coordinate.
pub fn param_names(repr: &Representation) -> Vec<String> {
    let heston = ["v_theta", "v0", "sigma_v", "rho", "kappa"];
    let fixed = |names: &[&str]| names.iter().map(|s| s.to_string()).collect();
    match repr.id() {
        ReprId::Bsm => fixed(&["sigma"]),
        ReprId::Absm => (0..6).map(|i| format!("alpha{i}")).collect(),
        ReprId::Hsv | ReprId::DsnnHsv => fixed(&heston),
        ReprId::Hsvj => {
            let mut v: Vec<String> = fixed(&heston);
            v.extend(fixed(&["p", "eta1", "eta2", "lambda"]));
            v
        }
        ReprId::DsnnNasv => {
            let mut v: Vec<String> = fixed(&heston);
            v.push("gamma_v".into());
            v
        }
        ReprId::Sabr => {
            let mut v: Vec<String> = fixed(&["alpha", "beta"]);
            v.extend((1..=SABR_GRID).map(|i| format!("nu_{i}")));
            v.extend((1..=SABR_GRID).map(|i| format!("rho_{i}")));
            v
        }
        ReprId::Mopa => {
            let cols = match repr {
                Representation::Mopa(g) => g.cols(),
                _ => MopaGrid::default().cols(),
            };
            (0..ReprId::Mopa.dim()).map(|i| format!("q_{}_{}", i / cols + 1, i % cols + 1)).collect()
        }
        ReprId::AeBsm => fixed(&["z1", "z2"]),
    }
}
