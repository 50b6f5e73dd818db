//! Offline-trained representations.
//!
//! Simulated prices from the Heston and non-affine stochastic-volatility
//! systems train a deep surrogate f(m, τ, r, φ); BSM surfaces on a fixed
//! (m, τ) grid train an autoencoder whose decoder maps a short latent code to
//! a whole surface. Both are frozen afterwards and exposed to the pricing
//! layer with φ (or the latent code) left differentiable.

mod autoencoder;
mod dataset;
mod dsnn;
mod sde;
mod train;

pub use autoencoder::{
    bsm_surfaces, read_autoencoder, train_autoencoder, write_autoencoder, AeConfig, AeRepr, Autoencoder, SurfaceGrid,
};
pub use dataset::{build_surrogate_dataset, DatasetOptions, SurrogateDataset};
pub use dsnn::DsnnRepr;
pub use sde::{simulate_price, terminal_log_prices, McPrice, SdeModel, SdeSpec};
pub use train::{read_surrogate, train_surrogate, write_surrogate, FrozenSurrogate, SurrogateTrainConfig};

use crate::autodiff::AdError;
use crate::nn::NnError;
use crate::skr::SkrError;

#[derive(Debug, thiserror::Error)]
pub enum SurrogateError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("bounds for {name}: lower {lo} must be below upper {hi}")]
    Bounds { name: String, lo: f64, hi: f64 },
    #[error("dataset is empty")]
    Empty,
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Skr(#[from] SkrError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform sampling box, one interval per named coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub names: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(entries: &[(&str, f64, f64)]) -> Result<Bounds, SurrogateError> {
        let b = Bounds {
            names: entries.iter().map(|e| e.0.to_string()).collect(),
            lo: entries.iter().map(|e| e.1).collect(),
            hi: entries.iter().map(|e| e.2).collect(),
        };
        b.validate()?;
        Ok(b)
    }

    /// m, τ, r followed by the Heston parameters in representation order.
    pub fn heston() -> Bounds {
        Bounds::new(&HESTON_BOX).expect("static bounds")
    }

    /// [`Bounds::heston`] plus γ_v.
    pub fn nasv() -> Bounds {
        let mut entries = HESTON_BOX.to_vec();
        entries.push(("gamma_v", 0.3, 0.9));
        Bounds::new(&entries).expect("static bounds")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.lo.len() != self.names.len() || self.hi.len() != self.names.len() {
            return Err(SurrogateError::Shape {
                expected: self.names.len(),
                got: self.lo.len().min(self.hi.len()),
            });
        }
        for ((name, &lo), &hi) in self.names.iter().zip(&self.lo).zip(&self.hi) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SurrogateError::Bounds {
                    name: name.clone(),
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len() && x.iter().zip(&self.lo).zip(&self.hi).all(|((v, lo), hi)| lo <= v && v <= hi)
    }
}

const HESTON_BOX: [(&str, f64, f64); 8] = [
    ("m", 0.5, 1.5),
    ("tau", 7.0 / 365.0, 1.0),
    ("r", 0.0, 0.08),
    ("v_theta", 0.01, 0.25),
    ("v0", 0.01, 0.25),
    ("sigma_v", 0.05, 1.0),
    ("rho", -0.95, 0.0),
    ("kappa", 0.5, 5.0),
];

/// Number of market coordinates (m, τ, r) leading every surrogate input row.
pub const MARKET_SLOTS: usize = 3;
