use crate::autodiff::Var;
use crate::skr::{ReprId, SkVars, SkrError};

use super::{FrozenSurrogate, SurrogateError, MARKET_SLOTS};

const START: [f64; 6] = [0.04, 0.04, 0.5, -0.5, 2.0, 0.5];

/// A frozen deep surrogate used as a representation. The parameter slots are
/// kept inside the surrogate's training box by lo + (hi − lo)·sigmoid(raw).
#[derive(Debug, Clone, PartialEq)]
pub struct DsnnRepr {
    id: ReprId,
    net: FrozenSurrogate,
}

impl DsnnRepr {
    pub fn new(id: ReprId, net: FrozenSurrogate) -> Result<DsnnRepr, SurrogateError> {
        if !matches!(id, ReprId::DsnnHsv | ReprId::DsnnNasv) {
            return Err(SurrogateError::Param(format!("{id} is not a deep-surrogate representation")));
        }
        if net.input_dim() != MARKET_SLOTS + id.dim() {
            return Err(SurrogateError::Shape {
                expected: MARKET_SLOTS + id.dim(),
                got: net.input_dim(),
            });
        }
        Ok(DsnnRepr { id, net })
    }

    pub fn id(&self) -> ReprId {
        self.id
    }

    pub fn surrogate(&self) -> &FrozenSurrogate {
        &self.net
    }

    fn slot(&self, j: usize) -> (f64, f64) {
        let b = self.net.bounds();
        (b.lo[MARKET_SLOTS + j], b.hi[MARKET_SLOTS + j])
    }

    pub fn transform<'t>(&self, raw: &[Var<'t>]) -> Vec<Var<'t>> {
        raw.iter()
            .enumerate()
            .map(|(j, &v)| {
                let (lo, hi) = self.slot(j);
                v.sigmoid() * (hi - lo) + lo
            })
            .collect()
    }

    /// Logits of the Heston start values (and γ_v = ½), clipped into the box.
    pub fn raw_init(&self) -> Vec<f64> {
        (0..self.id.dim())
            .map(|j| {
                let (lo, hi) = self.slot(j);
                let p = ((START[j] - lo) / (hi - lo)).clamp(0.01, 0.99);
                (p / (1.0 - p)).ln()
            })
            .collect()
    }

    pub fn price<'t>(&self, x: &SkVars<'t>, phi: &[Var<'t>]) -> Result<Var<'t>, SkrError> {
        let mut input = vec![x.m(), x.tau, x.r];
        input.extend_from_slice(phi);
        let c = self.net.forward(&input).map_err(|e| SkrError::Surrogate(e.to_string()))?;
        Ok(c * x.s)
    }
}
