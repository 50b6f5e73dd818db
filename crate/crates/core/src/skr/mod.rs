//! Structured-knowledge representations g_φ(X^SK).
//!
//! Every kernel takes its market inputs as tape variables ([`SkVars`]) and its
//! latent parameters in constrained form, so gradients reach both. The raw,
//! unconstrained optimiser coordinates are mapped to the constrained domain by
//! [`Representation::transform`].
//!
//! [`Representation::pricer`] binds a constrained parameter vector once and
//! returns a [`Pricer`] that prices any number of options against it; this is
//! where per-φ precomputation (SABR quadrature prefix sums, MOPA rows) lives.

mod bsm;
mod heston;
mod mopa;
mod sabr;
mod transform;

use std::cell::Cell;
use std::sync::Arc;

use crate::autodiff::{AdError, Tape, Var};
use crate::surrogate::{AeRepr, DsnnRepr};

pub use bsm::{absm_price, absm_vol, bsm_delta, bsm_price};
pub use heston::{
    cos_chi, cos_interval, cos_payoff_coeffs, cos_price, cos_psi, heston_cf, heston_cumulants, interval_from_cumulants,
    jump_cf, jump_cumulants, CosConfig,
    HestonParams, JumpParams,
};
pub use mopa::{mopa_price, MopaGrid};
pub use sabr::{sabr_implied_vol, sabr_price, sabr_time_functions, SabrCurves, SabrTimeFunctions, SABR_GRID};
pub use transform::{param_names, param_transform, raw_init};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SkrError {
    #[error("{repr}: expected {expected} parameters, got {got}")]
    Dimension {
        repr: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },
    #[error("maturity {0} must be positive")]
    Maturity(f64),
    #[error("maturity {0} is outside the grid range")]
    Tenor(f64),
    #[error("unknown representation {0:?}")]
    UnknownRepr(String),
    #[error("characteristic function overflow at u = {0}")]
    Overflow(f64),
    #[error("point {index}: {source}")]
    AtPoint { index: usize, source: Box<SkrError> },
    #[error("autodiff: {0}")]
    Ad(#[from] AdError),
    #[error("surrogate: {0}")]
    Surrogate(String),
}

impl SkrError {
    pub fn at(self, index: usize) -> SkrError {
        SkrError::AtPoint {
            index,
            source: Box::new(self),
        }
    }
}

/// Identity of a representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReprId {
    Bsm,
    Absm,
    Sabr,
    Hsv,
    Hsvj,
    Mopa,
    DsnnHsv,
    DsnnNasv,
    AeBsm,
}

impl ReprId {
    pub const ALL: [ReprId; 9] = [
        ReprId::Bsm,
        ReprId::Absm,
        ReprId::Sabr,
        ReprId::Hsv,
        ReprId::Hsvj,
        ReprId::Mopa,
        ReprId::DsnnHsv,
        ReprId::DsnnNasv,
        ReprId::AeBsm,
    ];

    /// Number of latent parameters.
    pub fn dim(self) -> usize {
        match self {
            ReprId::Bsm => 1,
            ReprId::Absm => 6,
            ReprId::Hsv => 5,
            ReprId::Hsvj => 9,
            ReprId::Sabr => 2 + 2 * SABR_GRID,
            ReprId::Mopa => 2000,
            ReprId::DsnnHsv => 5,
            ReprId::DsnnNasv => 6,
            ReprId::AeBsm => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReprId::Bsm => "BSM",
            ReprId::Absm => "ABSM",
            ReprId::Sabr => "SABR",
            ReprId::Hsv => "HSV",
            ReprId::Hsvj => "HSVJ",
            ReprId::Mopa => "MOPA",
            ReprId::DsnnHsv => "DSNN-HSV",
            ReprId::DsnnNasv => "DSNN-NASV",
            ReprId::AeBsm => "AE-BSM",
        }
    }

    pub fn parse(s: &str) -> Result<ReprId, SkrError> {
        let key = s.trim().to_ascii_uppercase().replace('_', "-");
        ReprId::ALL
            .into_iter()
            .find(|r| r.name() == key)
            .ok_or_else(|| SkrError::UnknownRepr(s.to_string()))
    }
}

impl std::fmt::Display for ReprId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Market inputs of one European call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkInputs {
    pub s: f64,
    pub k: f64,
    pub r: f64,
    pub tau: f64,
}

impl SkInputs {
    pub fn new(s: f64, k: f64, r: f64, tau: f64) -> Result<SkInputs, SkrError> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(SkrError::Domain { what: "S", value: s });
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(SkrError::Domain { what: "K", value: k });
        }
        if !r.is_finite() {
            return Err(SkrError::Domain { what: "r", value: r });
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(SkrError::Maturity(tau));
        }
        Ok(SkInputs { s, k, r, tau })
    }

    /// Spot-normalised inputs: S = 1, K = m.
    pub fn normalized(m: f64, tau: f64, r: f64) -> Result<SkInputs, SkrError> {
        SkInputs::new(1.0, m, r, tau)
    }

    pub fn m(&self) -> f64 {
        self.k / self.s
    }

    /// All four inputs as constants on `tape`.
    pub fn lift<'t>(&self, tape: &'t Tape) -> SkVars<'t> {
        SkVars {
            s: tape.constant(self.s),
            k: tape.constant(self.k),
            r: tape.constant(self.r),
            tau: tape.constant(self.tau),
        }
    }
}

/// [`SkInputs`] on a tape.
#[derive(Debug, Clone, Copy)]
pub struct SkVars<'t> {
    pub s: Var<'t>,
    pub k: Var<'t>,
    pub r: Var<'t>,
    pub tau: Var<'t>,
}

impl<'t> SkVars<'t> {
    pub fn values(&self) -> SkInputs {
        SkInputs {
            s: self.s.value(),
            k: self.k.value(),
            r: self.r.value(),
            tau: self.tau.value(),
        }
    }

    pub fn as_array(&self) -> [Var<'t>; 4] {
        [self.s, self.k, self.r, self.tau]
    }

    pub fn m(&self) -> Var<'t> {
        self.k / self.s
    }
}

thread_local! {
    static FLOOR_HITS: Cell<u64> = const { Cell::new(0) };
}

/// Number of implied volatilities floored on this thread since the last reset.
pub fn floor_hits() -> u64 {
    FLOOR_HITS.with(Cell::get)
}

pub fn reset_floor_hits() {
    FLOOR_HITS.with(|c| c.set(0));
}

pub const VOL_FLOOR: f64 = 1e-4;
const FLOOR_SHARPNESS: f64 = 1e5;

/// floor + softplus(k(x − floor))/k, which equals `x` to machine precision
/// once x − floor exceeds 40/k.
pub fn smooth_floor(x: Var<'_>, floor: f64) -> Var<'_> {
    if x.value() >= floor + 40.0 / FLOOR_SHARPNESS {
        return x;
    }
    if x.value() < floor {
        FLOOR_HITS.with(|c| c.set(c.get() + 1));
    }
    ((x - floor) * FLOOR_SHARPNESS).softplus() / FLOOR_SHARPNESS + floor
}

/// A representation together with any fixed configuration it needs.
#[derive(Debug, Clone)]
pub enum Representation {
    Bsm,
    Absm,
    Sabr,
    Hsv(CosConfig),
    Hsvj(CosConfig),
    Mopa(MopaGrid),
    Dsnn(Arc<DsnnRepr>),
    Autoencoder(Arc<AeRepr>),
}

impl Representation {
    /// Closed-form and grid representations with default settings. Surrogate
    /// representations need trained weights and cannot be built from an id.
    pub fn from_id(id: ReprId) -> Result<Representation, SkrError> {
        Ok(match id {
            ReprId::Bsm => Representation::Bsm,
            ReprId::Absm => Representation::Absm,
            ReprId::Sabr => Representation::Sabr,
            ReprId::Hsv => Representation::Hsv(CosConfig::default()),
            ReprId::Hsvj => Representation::Hsvj(CosConfig::default()),
            ReprId::Mopa => Representation::Mopa(MopaGrid::default()),
            other => {
                return Err(SkrError::Surrogate(format!(
                    "{other} requires a trained surrogate; load it explicitly"
                )))
            }
        })
    }

    pub fn id(&self) -> ReprId {
        match self {
            Representation::Bsm => ReprId::Bsm,
            Representation::Absm => ReprId::Absm,
            Representation::Sabr => ReprId::Sabr,
            Representation::Hsv(_) => ReprId::Hsv,
            Representation::Hsvj(_) => ReprId::Hsvj,
            Representation::Mopa(_) => ReprId::Mopa,
            Representation::Dsnn(d) => d.id(),
            Representation::Autoencoder(_) => ReprId::AeBsm,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Representation::Mopa(grid) => grid.len(),
            Representation::Autoencoder(ae) => ae.latent_dim(),
            _ => self.id().dim(),
        }
    }

    fn check_dim(&self, n: usize) -> Result<(), SkrError> {
        if n != self.dim() {
            return Err(SkrError::Dimension {
                repr: self.id().name(),
                expected: self.dim(),
                got: n,
            });
        }
        Ok(())
    }

    /// Raw coordinates to constrained parameters.
    pub fn transform<'t>(&self, raw: &[Var<'t>]) -> Result<Vec<Var<'t>>, SkrError> {
        transform::transform(self, raw)
    }

    /// Raw vector whose transform is the representation's starting point.
    pub fn raw_init(&self) -> Vec<f64> {
        transform::init(self)
    }

    /// Binds constrained parameters `phi`.
    pub fn pricer<'a, 't>(&'a self, phi: &[Var<'t>]) -> Result<Pricer<'a, 't>, SkrError> {
        self.check_dim(phi.len())?;
        let bound = match self {
            Representation::Sabr => Bound::Sabr(SabrCurves::new(phi[0], phi[1], &phi[2..2 + SABR_GRID], &phi[2 + SABR_GRID..])?),
            Representation::Mopa(grid) => Bound::Mopa(grid, phi.to_vec()),
            Representation::Autoencoder(ae) => Bound::Surface(ae, ae.decode(phi)?),
            _ => Bound::Plain(phi.to_vec()),
        };
        Ok(Pricer { repr: self, bound })
    }
}

enum Bound<'a, 't> {
    Plain(Vec<Var<'t>>),
    Sabr(SabrCurves<'t>),
    Mopa(&'a MopaGrid, Vec<Var<'t>>),
    Surface(&'a AeRepr, Vec<Var<'t>>),
}

/// A representation with its parameters bound on a tape.
pub struct Pricer<'a, 't> {
    repr: &'a Representation,
    bound: Bound<'a, 't>,
}

impl<'a, 't> Pricer<'a, 't> {
    /// Call price in the currency units of `x`.
    pub fn price(&self, x: &SkVars<'t>) -> Result<Var<'t>, SkrError> {
        match (&self.bound, self.repr) {
            (Bound::Sabr(c), _) => c.price(x),
            (Bound::Mopa(grid, q), _) => mopa_price(x, grid, q),
            (Bound::Surface(ae, surface), _) => ae.interpolate(x, surface),
            (Bound::Plain(phi), Representation::Bsm) => bsm_price(x, phi[0]),
            (Bound::Plain(phi), Representation::Absm) => absm_price(x, phi),
            (Bound::Plain(phi), Representation::Hsv(cos)) => {
                cos_price(x, &HestonParams::from_slice(phi), None, cos)
            }
            (Bound::Plain(phi), Representation::Hsvj(cos)) => cos_price(
                x,
                &HestonParams::from_slice(&phi[..5]),
                Some(&JumpParams::from_slice(&phi[5..])),
                cos,
            ),
            (Bound::Plain(phi), Representation::Dsnn(d)) => d.price(x, phi),
            (Bound::Plain(_), _) => unreachable!("grid representations bind their own state"),
        }
    }

    /// Price-to-strike ratio C/K for spot-normalised inputs (S = 1, K = m).
    pub fn price_over_strike(&self, m: f64, tau: f64, r: f64) -> Result<Var<'t>, SkrError> {
        let tape = self.tape();
        let x = SkInputs::normalized(m, tau, r)?.lift(tape);
        Ok(self.price(&x)? / m)
    }

    fn tape(&self) -> &'t Tape {
        match &self.bound {
            Bound::Plain(phi) => phi[0].tape(),
            Bound::Sabr(c) => c.tape(),
            Bound::Mopa(_, q) => q[0].tape(),
            Bound::Surface(_, s) => s[0].tape(),
        }
    }
}

/// Dispatches to the kernel of `repr`.
pub fn skr_price<'t>(repr: &Representation, x: &SkVars<'t>, phi: &[Var<'t>]) -> Result<Var<'t>, SkrError> {
    repr.pricer(phi)?.price(x)
}

#[cfg(test)]
mod tests;
