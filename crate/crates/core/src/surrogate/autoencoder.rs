use std::io::{Read, Write};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::autodiff::Var;
use crate::nn::{read_line, read_params, write_params, Activation, MlpConfig, MlpParams};
use crate::optim::Adam;
use crate::rng::{derive_seed, rng_for, stream};
use crate::skr::{bsm_price, SkInputs, SkVars, SkrError};

use super::train::parse_f64;
use super::SurrogateError;

/// Fixed (m, τ) grid of a price surface, stored τ-major: entry
/// `t * m.len() + j` is the price at (m[j], tau[t]).
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub m: Vec<f64>,
    pub tau: Vec<f64>,
}

impl Default for SurfaceGrid {
    /// 20 moneyness points on [0.7, 1.3] and maturities 0.1, …, 1.0.
    fn default() -> Self {
        SurfaceGrid {
            m: (0..20).map(|j| 0.7 + 0.6 * j as f64 / 19.0).collect(),
            tau: (1..=10).map(|t| t as f64 / 10.0).collect(),
        }
    }
}

impl SurfaceGrid {
    pub fn len(&self) -> usize {
        self.m.len() * self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, t: usize, j: usize) -> usize {
        t * self.m.len() + j
    }
}

/// BSM call surfaces in units of spot (S = 1, K = m), one per volatility.
pub fn bsm_surfaces(sigmas: &[f64], r: f64, grid: &SurfaceGrid) -> Result<Vec<Vec<f64>>, SkrError> {
    let tape = crate::autodiff::Tape::new();
    let mut out = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut s = Vec::with_capacity(grid.len());
        for &tau in &grid.tau {
            for &m in &grid.m {
                let mark = tape.checkpoint();
                let x = SkInputs::normalized(m, tau, r)?.lift(&tape);
                s.push(bsm_price(&x, tape.constant(sigma))?.value());
                tape.truncate(mark);
            }
        }
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeConfig {
    pub latent_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub activation: Activation,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub lr_final_frac: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            latent_dim: 2,
            hidden_layers: 2,
            hidden_width: 64,
            activation: Activation::Relu,
            epochs: 1000,
            lr: 1e-3,
            batch_size: 64,
            lr_final_frac: 0.01,
            seed: 0,
        }
    }
}

/// Encoder and decoder trained jointly on standardised surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: MlpParams,
    pub decoder: MlpParams,
    pub grid: SurfaceGrid,
    point_mean: Vec<f64>,
    scale: f64,
    /// Mean latent code of the training surfaces.
    pub latent_mean: Vec<f64>,
    /// In-sample reconstruction RMSE in price units.
    pub final_rmse: f64,
}

impl Autoencoder {
    pub fn latent_dim(&self) -> usize {
        self.decoder.config().input_dim
    }

    fn standardize(&self, surfaces: &[Vec<f64>]) -> Array2<f64> {
        Array2::from_shape_fn((surfaces.len(), self.grid.len()), |(i, p)| {
            (surfaces[i][p] - self.point_mean[p]) / self.scale
        })
    }

    pub fn encode(&self, surface: &[f64]) -> Result<Vec<f64>, SurrogateError> {
        let x = self.standardize(&[surface.to_vec()]);
        Ok(self.encoder.forward_value(x.row(0).as_slice().expect("row-major"))?)
    }

    pub fn decode_value(&self, z: &[f64]) -> Result<Vec<f64>, SurrogateError> {
        let out = self.decoder.forward_value(z)?;
        Ok(out.iter().zip(&self.point_mean).map(|(v, m)| m + self.scale * v).collect())
    }

    /// Decoded surface on the tape; only `z` is differentiable.
    pub fn decode<'t>(&self, z: &[Var<'t>]) -> Result<Vec<Var<'t>>, SurrogateError> {
        let out = self.decoder.forward_frozen(z)?;
        Ok(out.into_iter().zip(&self.point_mean).map(|(v, &m)| v * self.scale + m).collect())
    }

    pub fn reconstruct(&self, surface: &[f64]) -> Result<Vec<f64>, SurrogateError> {
        self.decode_value(&self.encode(surface)?)
    }
}

fn check_surfaces(surfaces: &[Vec<f64>], grid: &SurfaceGrid) -> Result<(), SurrogateError> {
    if surfaces.is_empty() {
        return Err(SurrogateError::Empty);
    }
    for s in surfaces {
        if s.len() != grid.len() {
            return Err(SurrogateError::Shape {
                expected: grid.len(),
                got: s.len(),
            });
        }
    }
    Ok(())
}

/// Minimises the mean squared reconstruction error with mini-batch Adam.
pub fn train_autoencoder(
    surfaces: &[Vec<f64>],
    grid: &SurfaceGrid,
    cfg: &AeConfig,
) -> Result<Autoencoder, SurrogateError> {
    check_surfaces(surfaces, grid)?;
    let p = grid.len();
    let n = surfaces.len();
    let point_mean: Vec<f64> = (0..p).map(|j| surfaces.iter().map(|s| s[j]).sum::<f64>() / n as f64).collect();
    let sd = (surfaces
        .iter()
        .flat_map(|s| s.iter().zip(&point_mean).map(|(v, m)| (v - m).powi(2)))
        .sum::<f64>()
        / (n * p) as f64)
        .sqrt();
    let enc_cfg = MlpConfig::new(p, cfg.hidden_layers, cfg.hidden_width)
        .with_output_dim(cfg.latent_dim)
        .with_activation(cfg.activation)
        .with_seed(derive_seed(cfg.seed, stream::INIT, 0));
    let dec_cfg = MlpConfig::new(cfg.latent_dim, cfg.hidden_layers, cfg.hidden_width)
        .with_output_dim(p)
        .with_activation(cfg.activation)
        .with_seed(derive_seed(cfg.seed, stream::INIT, 1));
    let mut ae = Autoencoder {
        encoder: MlpParams::init(&enc_cfg)?,
        decoder: MlpParams::init(&dec_cfg)?,
        grid: grid.clone(),
        point_mean,
        scale: if sd > 1e-12 { sd } else { 1.0 },
        latent_mean: vec![],
        final_rmse: f64::NAN,
    };
    let x = ae.standardize(surfaces);
    let batch = cfg.batch_size.clamp(1, n);
    let mut opt_e = Adam::new(ae.encoder.len(), cfg.lr);
    let mut opt_d = Adam::new(ae.decoder.len(), cfg.lr);
    let mut rng = rng_for(cfg.seed, stream::SHUFFLE);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr * cfg.lr_final_frac.powf(epoch as f64 / cfg.epochs.max(2).saturating_sub(1) as f64);
        opt_e.lr = lr;
        opt_d.lr = lr;
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(batch) {
            let xb = x.select(Axis(0), idx);
            let fe = ae.encoder.forward_batch(xb.view())?;
            let fd = ae.decoder.forward_batch(fe.output().view())?;
            let resid = fd.output() - &xb;
            total += resid.iter().map(|r| r * r).sum::<f64>();
            let scale = 2.0 / (idx.len() * p) as f64;
            let (gd, dz) = ae.decoder.backward_batch(&fd, resid.mapv(|r| r * scale).view());
            let (ge, _) = ae.encoder.backward_batch(&fe, dz.view());
            opt_d.step(ae.decoder.flat_mut(), &gd);
            opt_e.step(ae.encoder.flat_mut(), &ge);
        }
        if !total.is_finite() {
            return Err(SurrogateError::Divergence { epoch });
        }
    }
    let codes = ae.encoder.forward_batch(x.view())?;
    ae.latent_mean = codes.output().mean_axis(Axis(0)).expect("non-empty").to_vec();
    let recon = ae.decoder.forward_batch(codes.output().view())?;
    let mse = (recon.output() - &x).iter().map(|r| r * r).sum::<f64>() / (n * p) as f64;
    ae.final_rmse = mse.sqrt() * ae.scale;
    Ok(ae)
}

/// The decoder used as a representation with the latent code as φ.
#[derive(Debug, Clone, PartialEq)]
pub struct AeRepr {
    ae: Autoencoder,
}

impl AeRepr {
    pub fn new(ae: Autoencoder) -> AeRepr {
        AeRepr { ae }
    }

    pub fn autoencoder(&self) -> &Autoencoder {
        &self.ae
    }

    pub fn latent_dim(&self) -> usize {
        self.ae.latent_dim()
    }

    pub fn transform<'t>(&self, raw: &[Var<'t>]) -> Vec<Var<'t>> {
        raw.to_vec()
    }

    pub fn raw_init(&self) -> Vec<f64> {
        self.ae.latent_mean.clone()
    }

    pub fn decode<'t>(&self, z: &[Var<'t>]) -> Result<Vec<Var<'t>>, SkrError> {
        self.ae.decode(z).map_err(|e| SkrError::Surrogate(e.to_string()))
    }

    /// Bilinear interpolation of a decoded surface at (K/S, τ), clamped to the
    /// grid, scaled by spot.
    pub fn interpolate<'t>(&self, x: &SkVars<'t>, surface: &[Var<'t>]) -> Result<Var<'t>, SkrError> {
        let g = &self.ae.grid;
        let (jm, wm) = locate(x.m(), &g.m);
        let (jt, wt) = locate(x.tau, &g.tau);
        let at = |t: usize, j: usize| surface[g.index(t, j)];
        let lower = at(jt, jm) * (1.0 - wm) + at(jt, jm + 1) * wm;
        let upper = at(jt + 1, jm) * (1.0 - wm) + at(jt + 1, jm + 1) * wm;
        Ok((lower * (1.0 - wt) + upper * wt) * x.s)
    }

    pub fn price<'t>(&self, x: &SkVars<'t>, phi: &[Var<'t>]) -> Result<Var<'t>, SkrError> {
        let surface = self.decode(phi)?;
        self.interpolate(x, &surface)
    }
}

// cell index and the weight of its upper node
fn locate<'t>(v: Var<'t>, nodes: &[f64]) -> (usize, Var<'t>) {
    let last = nodes.len() - 1;
    let tape = v.tape();
    let x = v.value();
    if x <= nodes[0] {
        return (0, tape.constant(0.0));
    }
    if x >= nodes[last] {
        return (last - 1, tape.constant(1.0));
    }
    let j = nodes.partition_point(|&n| n <= x).saturating_sub(1).min(last - 1);
    (j, (v - nodes[j]) / (nodes[j + 1] - nodes[j]))
}

const MAGIC: &str = "skinn-ae v1";

pub fn write_autoencoder<W: Write>(ae: &Autoencoder, mut w: W) -> Result<(), SurrogateError> {
    writeln!(w, "{MAGIC}")?;
    for m in &ae.grid.m {
        writeln!(w, "grid_m={m}")?;
    }
    for t in &ae.grid.tau {
        writeln!(w, "grid_tau={t}")?;
    }
    for v in &ae.point_mean {
        writeln!(w, "point_mean={v}")?;
    }
    for v in &ae.latent_mean {
        writeln!(w, "latent_mean={v}")?;
    }
    writeln!(w, "scale={}", ae.scale)?;
    writeln!(w, "final_rmse={}", ae.final_rmse)?;
    writeln!(w, "end")?;
    write_params(&ae.encoder, &mut w)?;
    write_params(&ae.decoder, &mut w)?;
    Ok(())
}

pub fn read_autoencoder<R: Read>(mut r: R) -> Result<Autoencoder, SurrogateError> {
    let magic = read_line(&mut r)?;
    if magic != MAGIC {
        return Err(SurrogateError::Format(format!("bad magic {magic:?}")));
    }
    let mut grid = SurfaceGrid { m: vec![], tau: vec![] };
    let (mut point_mean, mut latent_mean) = (vec![], vec![]);
    let (mut scale, mut final_rmse) = (1.0, f64::NAN);
    loop {
        let line = read_line(&mut r)?;
        if line == "end" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| SurrogateError::Format(format!("malformed line {line:?}")))?;
        let x = parse_f64(k, v)?;
        match k {
            "grid_m" => grid.m.push(x),
            "grid_tau" => grid.tau.push(x),
            "point_mean" => point_mean.push(x),
            "latent_mean" => latent_mean.push(x),
            "scale" => scale = x,
            "final_rmse" => final_rmse = x,
            _ => return Err(SurrogateError::Format(format!("unknown key {k:?}"))),
        }
    }
    let encoder = read_params(&mut r)?;
    let decoder = read_params(&mut r)?;
    if point_mean.len() != grid.len() || decoder.config().output_dim != grid.len() || grid.m.len() < 2 || grid.tau.len() < 2 {
        return Err(SurrogateError::Format("surface grid does not match the decoder".into()));
    }
    Ok(Autoencoder {
        encoder,
        decoder,
        grid,
        point_mean,
        scale,
        latent_mean,
        final_rmse,
    })
}
