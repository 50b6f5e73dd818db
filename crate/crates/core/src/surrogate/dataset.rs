use std::io::{Read, Write};

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::rng::{derive_seed, rng_for, stream};
use crate::skr::SkInputs;

use super::sde::{simulate_price, SdeModel, SdeSpec};
use super::{Bounds, SurrogateError, MARKET_SLOTS};

/// Sampled inputs with their prices, in spot-normalised units (S = 1, K = m).
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateDataset {
    pub bounds: Bounds,
    /// One row per sample, columns in `bounds.names` order.
    pub inputs: Array2<f64>,
    pub prices: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub paths: usize,
    pub steps_per_year: f64,
    pub seed: u64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            paths: 1000,
            steps_per_year: 250.0,
            seed: 0,
        }
    }
}

impl SurrogateDataset {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// `n` uniform draws from `bounds`, each priced by `price`.
    pub fn from_fn<F>(bounds: &Bounds, n: usize, seed: u64, price: F) -> Result<SurrogateDataset, SurrogateError>
    where
        F: Fn(usize, &[f64]) -> Result<f64, SurrogateError> + Sync,
    {
        bounds.validate()?;
        let d = bounds.len();
        let mut rng = rng_for(seed, stream::DATASET);
        let mut inputs = Array2::zeros((n, d));
        for mut row in inputs.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = rng.gen_range(bounds.lo[j]..bounds.hi[j]);
            }
        }
        let prices = (0..n)
            .into_par_iter()
            .map(|i| price(i, inputs.row(i).as_slice().expect("row-major")))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(SurrogateDataset {
            bounds: bounds.clone(),
            inputs,
            prices,
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SurrogateError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = self.bounds.names.clone();
        header.push("price".into());
        out.write_record(&header)?;
        for (row, price) in self.inputs.rows().into_iter().zip(&self.prices) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            rec.push(format!("{price:e}"));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads rows written by [`SurrogateDataset::write_csv`]; the header must
    /// match `bounds`.
    pub fn read_csv<R: Read>(r: R, bounds: &Bounds) -> Result<SurrogateDataset, SurrogateError> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let mut expected = bounds.names.clone();
        expected.push("price".into());
        if header != expected {
            return Err(SurrogateError::Format(format!("header {header:?}, expected {expected:?}")));
        }
        let d = bounds.len();
        let mut flat = Vec::new();
        let mut prices = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| SurrogateError::Format(format!("row {}: {e}", line + 1)))?;
            flat.extend_from_slice(&vals[..d]);
            prices.push(vals[d]);
        }
        let inputs = Array2::from_shape_vec((prices.len(), d), flat).map_err(|e| SurrogateError::Format(e.to_string()))?;
        Ok(SurrogateDataset {
            bounds: bounds.clone(),
            inputs,
            prices,
        })
    }
}

fn sde_for(model: SdeModel, row: &[f64], opts: &DatasetOptions, seed: u64) -> SdeSpec {
    let phi = &row[MARKET_SLOTS..];
    let (v_theta, v0, sigma_v, rho, kappa) = (phi[0], phi[1], phi[2], phi[3], phi[4]);
    let spec = match model {
        SdeModel::Hsv => SdeSpec::heston(kappa, v_theta, sigma_v, rho, v0),
        SdeModel::Nasv => SdeSpec::nasv(kappa, v_theta, sigma_v, rho, v0, phi[5]),
    };
    spec.with_paths(opts.paths)
        .with_steps_per_year(opts.steps_per_year)
        .with_seed(seed)
}

/// `n` draws of (m, τ, r, φ) with Monte-Carlo call prices in units of spot.
/// `bounds` must list m, τ, r and then the model parameters in representation
/// order (v_θ, v₀, σ_v, ρ, κ, and γ_v for NASV).
pub fn build_surrogate_dataset(
    model: SdeModel,
    n: usize,
    bounds: &Bounds,
    opts: &DatasetOptions,
) -> Result<SurrogateDataset, SurrogateError> {
    let want = MARKET_SLOTS
        + match model {
            SdeModel::Hsv => 5,
            SdeModel::Nasv => 6,
        };
    if bounds.len() != want {
        return Err(SurrogateError::Shape {
            expected: want,
            got: bounds.len(),
        });
    }
    SurrogateDataset::from_fn(bounds, n, opts.seed, |i, row| {
        let x = SkInputs::normalized(row[0], row[1], row[2])?;
        let spec = sde_for(model, row, opts, derive_seed(opts.seed, stream::SIMULATION, i as u64));
        Ok(simulate_price(&spec, &x)?.price)
    })
}
