use crate::autodiff::Var;

use super::{SkVars, SkrError};

/// Tenors and relative state grid of the probability-matrix representation.
#[derive(Debug, Clone, PartialEq)]
pub struct MopaGrid {
    pub tenors: Vec<f64>,
    /// States as multiples of spot, shared by every tenor.
    pub states: Vec<f64>,
    /// Largest accepted maturity.
    pub max_tau: f64,
}

impl Default for MopaGrid {
    /// Tenors 0.1, …, 1.0 and 200 states equally spaced on [0.5, 1.5]·S.
    fn default() -> Self {
        MopaGrid::new(10, 200, 0.5, 1.5)
    }
}

impl MopaGrid {
    pub fn new(n_tenors: usize, n_states: usize, lo: f64, hi: f64) -> Self {
        let tenors = (1..=n_tenors).map(|h| h as f64 / n_tenors as f64).collect();
        let step = (hi - lo) / (n_states - 1) as f64;
        let states = (0..n_states).map(|i| lo + step * i as f64).collect();
        MopaGrid {
            tenors,
            states,
            max_tau: 1.05,
        }
    }

    pub fn rows(&self) -> usize {
        self.tenors.len()
    }

    pub fn cols(&self) -> usize {
        self.states.len()
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the grid tenor nearest `tau`.
    pub fn tenor_index(&self, tau: f64) -> Result<usize, SkrError> {
        if !(tau > 0.0 && tau <= self.max_tau) {
            return Err(SkrError::Tenor(tau));
        }
        let mut best = 0;
        for (h, t) in self.tenors.iter().enumerate() {
            if (t - tau).abs() < (self.tenors[best] - tau).abs() {
                best = h;
            }
        }
        Ok(best)
    }
}

/// e^{−rτ_h}·Σ_i (S_i − K)⁺·Q_{h,i} with `q` the row-major softmaxed matrix.
pub fn mopa_price<'t>(x: &SkVars<'t>, grid: &MopaGrid, q: &[Var<'t>]) -> Result<Var<'t>, SkrError> {
    if q.len() != grid.len() {
        return Err(SkrError::Dimension {
            repr: "MOPA",
            expected: grid.len(),
            got: q.len(),
        });
    }
    let h = grid.tenor_index(x.tau.value())?;
    let row = &q[h * grid.cols()..(h + 1) * grid.cols()];
    let payoffs: Vec<Var<'t>> = grid.states.iter().map(|&s| (x.s * s - x.k).max0()).collect();
    let tape = x.s.tape();
    let value = tape.dot(row, &payoffs, tape.constant(0.0));
    Ok(value * (-(x.r * grid.tenors[h])).exp())
}
