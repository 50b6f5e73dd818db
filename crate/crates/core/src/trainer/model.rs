use std::io::{Read, Write};

use ndarray::{Array2, ArrayView2};

use crate::config::KvConfig;
use crate::nn::{read_line, read_params, write_params, MlpParams};
use crate::skr::{Representation, SkInputs};

use super::{constrained_phi, network_input, network_inputs, network_ratio, LossParts, TraceEntry, TrainConfig, TrainError, FEATURE_SCALE};

/// A trained SKINN. Immutable once returned.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub params: MlpParams,
    pub raw_phi: Vec<f64>,
    pub phi: Vec<f64>,
    pub config: TrainConfig,
    /// Rate used for the collocation and boundary points.
    pub colloc_r: f64,
    /// L_data at the returned parameters.
    pub l_data: f64,
    /// L_SK at the returned parameters (0 when λ = 0).
    pub l_sk: f64,
    pub trace: Vec<TraceEntry>,
}

impl FittedModel {
    pub(super) fn assemble(
        config: TrainConfig,
        repr: &Representation,
        v: Vec<f64>,
        colloc_r: f64,
        last: LossParts,
        trace: Vec<TraceEntry>,
    ) -> Result<FittedModel, TrainError> {
        let mlp = config.mlp.clone().with_seed(config.init_seed());
        let p = mlp.param_count();
        let raw_phi = v[p..].to_vec();
        let phi = constrained_phi(repr, &raw_phi)?;
        let params = MlpParams::from_flat(&mlp, v[..p].to_vec())?;
        Ok(FittedModel {
            params,
            raw_phi,
            phi,
            config,
            colloc_r,
            l_data: last.data,
            l_sk: last.sk,
            trace,
        })
    }

    /// The concatenated (θ, raw φ) vector.
    pub fn vector(&self) -> Vec<f64> {
        let mut v = self.params.flat().to_vec();
        v.extend_from_slice(&self.raw_phi);
        v
    }

    /// Network outputs C/K for rows of (m, τ, r).
    pub fn predict_ratio(&self, features: ArrayView2<'_, f64>) -> Result<Vec<f64>, TrainError> {
        network_ratio(&self.params, features)
    }

    pub fn price(&self, x: &SkInputs) -> Result<f64, TrainError> {
        Ok(x.k * self.params.forward_value(&network_input(&[x.m(), x.tau, x.r]))?[0])
    }

    pub fn prices(&self, xs: &[SkInputs]) -> Result<Vec<f64>, TrainError> {
        let f = self.predict_ratio(features_of(xs).view())?;
        Ok(f.iter().zip(xs).map(|(f, x)| f * x.k).collect())
    }

    /// ∂C/∂S. With C = K f(K/S, τ, r) this is −(K/S)² ∂f/∂m.
    pub fn deltas(&self, xs: &[SkInputs]) -> Result<Vec<f64>, TrainError> {
        let feats = network_inputs(features_of(xs).view());
        let fwd = self.params.forward_batch(feats.view())?;
        let ones = Array2::from_elem((xs.len(), 1), 1.0);
        let (_, dx) = self.params.backward_batch(&fwd, ones.view());
        Ok(xs.iter().enumerate().map(|(i, x)| -(x.k / x.s).powi(2) * FEATURE_SCALE[0] * dx[[i, 0]]).collect())
    }
}

fn features_of(xs: &[SkInputs]) -> Array2<f64> {
    Array2::from_shape_fn((xs.len(), 3), |(i, j)| [xs[i].m(), xs[i].tau, xs[i].r][j])
}

const MAGIC: &str = "skinn-model v1";

fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(8 * v.len());
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Text header (configuration, losses, trace), then the network, then raw
/// and constrained φ as little-endian `f64`.
pub fn write_model<W: Write>(m: &FittedModel, mut w: W) -> Result<(), TrainError> {
    writeln!(w, "{MAGIC}")?;
    m.config.write_kv(&mut w)?;
    writeln!(w, "colloc_r={}", m.colloc_r)?;
    writeln!(w, "l_data={}", m.l_data)?;
    writeln!(w, "l_sk={}", m.l_sk)?;
    writeln!(w, "phi_len={}", m.raw_phi.len())?;
    writeln!(w, "trace_len={}", m.trace.len())?;
    writeln!(w, "end")?;
    for t in &m.trace {
        writeln!(w, "{},{},{},{}", t.epoch, t.l_data, t.l_sk, t.total)?;
    }
    write_params(&m.params, &mut w)?;
    write_f64s(&mut w, &m.raw_phi)?;
    write_f64s(&mut w, &m.phi)?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> TrainError {
    TrainError::Format(msg.into())
}

pub fn read_model<R: Read>(mut r: R) -> Result<FittedModel, TrainError> {
    let magic = read_line(&mut r)?;
    if magic != MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut header = String::new();
    loop {
        let line = read_line(&mut r)?;
        if line == "end" {
            break;
        }
        header.push_str(&line);
        header.push('\n');
    }
    let mut kv = KvConfig::parse(&header)?;
    let colloc_r: f64 = kv.require("colloc_r")?;
    let l_data: f64 = kv.require("l_data")?;
    let l_sk: f64 = kv.require("l_sk")?;
    let phi_len: usize = kv.require("phi_len")?;
    let trace_len: usize = kv.require("trace_len")?;
    let config = TrainConfig::from_kv(&mut kv)?;
    kv.finish()?;
    let mut trace = Vec::with_capacity(trace_len);
    for _ in 0..trace_len {
        let line = read_line(&mut r)?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(format!("malformed trace line {line:?}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("malformed trace line {line:?}")));
        trace.push(TraceEntry {
            epoch: f[0].parse().map_err(|_| bad(format!("malformed trace line {line:?}")))?,
            l_data: num(f[1])?,
            l_sk: num(f[2])?,
            total: num(f[3])?,
        });
    }
    let params = read_params(&mut r)?;
    let expected = config.mlp.clone().with_seed(config.init_seed());
    if params.config() != &expected {
        return Err(bad("network header disagrees with the training configuration"));
    }
    let raw_phi = read_f64s(&mut r, phi_len)?;
    let phi = read_f64s(&mut r, phi_len)?;
    Ok(FittedModel {
        params,
        raw_phi,
        phi,
        config,
        colloc_r,
        l_data,
        l_sk,
        trace,
    })
}
