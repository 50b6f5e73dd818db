//! Joint estimation of the network θ and the representation parameters φ.
//!
//! The objective is L_data(θ) + λ·L_SK(θ, φ): mean squared error against the
//! observed C/K ratios plus mean squared disagreement between the network and
//! g_φ at a fixed set of collocation points. Both blocks are updated by one
//! full-batch Adam over the concatenated vector (θ, raw φ).

mod meanvar;
mod model;
mod objective;

use std::io::Write;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::config::{ConfigError, KvConfig};
use crate::nn::{Activation, MlpConfig, MlpParams, NnError};
use crate::optim::Adam;
use crate::panel::{OptionPanel, PanelError, MAX_TAU, MIN_TAU};
use crate::rng::{derive_seed, rng_for, stream};
use crate::skr::{ReprId, Representation, SkrError};

pub use meanvar::{clamp_normalize, fit_meanvar_weights, meanvar_sk_loss, MeanVarSpec};
pub use model::{read_model, write_model, FittedModel};
pub use objective::{constrained_phi, kernel_values, transform_jacobian, LossParts, Objective};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("panel is empty")]
    EmptyPanel,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite {component} at epoch {epoch}")]
    NonFinite { epoch: usize, component: &'static str },
    #[error("infeasible weight bounds: {0}")]
    Infeasible(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Skr(#[from] SkrError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Ad(#[from] crate::autodiff::AdError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Kv(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sampling box for collocation and boundary points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollocBox {
    pub m: (f64, f64),
    pub tau: (f64, f64),
}

impl Default for CollocBox {
    fn default() -> Self {
        CollocBox {
            m: (0.7, 1.3),
            tau: (MIN_TAU, MAX_TAU),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub repr: ReprId,
    /// Weight of L_SK; the data weight is 1.
    pub lambda_sk: f64,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub n_colloc: usize,
    /// Root seed; network init, collocation and boundary draws use separate streams.
    pub seed: u64,
    pub boundary: bool,
    pub colloc_box: CollocBox,
    pub mlp: MlpConfig,
}

impl TrainConfig {
    pub fn new(repr: ReprId) -> Self {
        TrainConfig {
            repr,
            lambda_sk: 1.0,
            epochs: 500,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            n_colloc: 2048,
            seed: 0,
            boundary: false,
            colloc_box: CollocBox::default(),
            mlp: MlpConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_sk = lambda;
        self
    }

    /// Network seed derived from the root seed.
    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, stream::INIT, 0)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.lambda_sk >= 0.0 && self.lambda_sk.is_finite()) {
            return bad(format!("lambda must be finite and non-negative, got {}", self.lambda_sk));
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("Adam settings out of range".into());
        }
        if self.lambda_sk > 0.0 && self.n_colloc == 0 {
            return bad("lambda > 0 needs n_colloc > 0".into());
        }
        let b = self.colloc_box;
        if !(b.m.0 > 0.0 && b.m.0 < b.m.1 && b.tau.0 > 0.0 && b.tau.0 < b.tau.1) {
            return bad(format!("degenerate collocation box {b:?}"));
        }
        if self.mlp.input_dim != 3 || self.mlp.output_dim != 1 {
            return bad("the pricing network maps (m, tau, r) to one output".into());
        }
        Ok(())
    }

    /// Reads the training keys from `kv`, leaving any others in place.
    pub fn from_kv(kv: &mut KvConfig) -> Result<TrainConfig, TrainError> {
        let repr: String = kv.require("repr")?;
        let mut c = TrainConfig::new(ReprId::parse(&repr)?);
        c.lambda_sk = kv.take_or("lambda", c.lambda_sk)?;
        c.epochs = kv.take_or("epochs", c.epochs)?;
        c.lr = kv.take_or("lr", c.lr)?;
        c.beta1 = kv.take_or("beta1", c.beta1)?;
        c.beta2 = kv.take_or("beta2", c.beta2)?;
        c.eps = kv.take_or("eps", c.eps)?;
        c.n_colloc = kv.take_or("n_colloc", c.n_colloc)?;
        c.seed = kv.take_or("seed", c.seed)?;
        c.boundary = kv.take_or("boundary", c.boundary)?;
        if let Some(m) = kv.take_range("colloc_m")? {
            c.colloc_box.m = m;
        }
        if let Some(t) = kv.take_range("colloc_tau")? {
            c.colloc_box.tau = t;
        }
        c.mlp.hidden_layers = kv.take_or("hidden_layers", c.mlp.hidden_layers)?;
        c.mlp.hidden_width = kv.take_or("hidden_width", c.mlp.hidden_width)?;
        if let Some(a) = kv.take::<String>("activation")? {
            c.mlp.activation = Activation::parse(&a).ok_or_else(|| TrainError::Config(format!("unknown activation {a:?}")))?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Writes every key understood by [`TrainConfig::from_kv`].
    pub fn write_kv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "repr={}", self.repr.name())?;
        writeln!(w, "lambda={}", self.lambda_sk)?;
        writeln!(w, "epochs={}", self.epochs)?;
        writeln!(w, "lr={}", self.lr)?;
        writeln!(w, "beta1={}", self.beta1)?;
        writeln!(w, "beta2={}", self.beta2)?;
        writeln!(w, "eps={}", self.eps)?;
        writeln!(w, "n_colloc={}", self.n_colloc)?;
        writeln!(w, "seed={}", self.seed)?;
        writeln!(w, "boundary={}", self.boundary)?;
        writeln!(w, "colloc_m={},{}", self.colloc_box.m.0, self.colloc_box.m.1)?;
        writeln!(w, "colloc_tau={},{}", self.colloc_box.tau.0, self.colloc_box.tau.1)?;
        writeln!(w, "hidden_layers={}", self.mlp.hidden_layers)?;
        writeln!(w, "hidden_width={}", self.mlp.hidden_width)?;
        writeln!(w, "activation={}", self.mlp.activation.name())?;
        Ok(())
    }
}

/// The network sees (m, τ, r) through the fixed map z = (x − center)·scale.
pub const FEATURE_CENTER: [f64; 3] = [1.0, 0.5, 0.0];
pub const FEATURE_SCALE: [f64; 3] = [5.0, 2.0, 10.0];

pub fn network_input(x: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|j| (x[j] - FEATURE_CENTER[j]) * FEATURE_SCALE[j])
}

/// [`network_input`] applied to every (m, τ, r) row.
pub fn network_inputs(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut z = x.to_owned();
    for mut row in z.rows_mut() {
        for j in 0..3 {
            row[j] = (row[j] - FEATURE_CENTER[j]) * FEATURE_SCALE[j];
        }
    }
    z
}

/// `n` uniform (m, τ) draws from `bx` with r fixed, as (m, τ, r) rows.
pub fn collocation_points(bx: &CollocBox, n: usize, r: f64, seed: u64) -> Array2<f64> {
    let mut rng = rng_for(seed, stream::COLLOCATION);
    let mut out = Array2::zeros((n, 3));
    for mut row in out.rows_mut() {
        row[0] = rng.gen_range(bx.m.0..bx.m.1);
        row[1] = rng.gen_range(bx.tau.0..bx.tau.1);
        row[2] = r;
    }
    out
}

pub const BOUNDARY_POINTS: usize = 100;
pub const BOUNDARY_TAU: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// τ → 0: the call is worth its intrinsic value.
    Intrinsic,
    /// m ≥ 1.5 and τ ≤ 0.05: the call is worthless.
    DeepOtm,
    /// C ≥ S − K e^{−rτ}.
    LowerBound,
}

/// Target in C/K units.
pub fn boundary_target(kind: BoundaryKind, m: f64, tau: f64, r: f64) -> f64 {
    match kind {
        BoundaryKind::Intrinsic => (1.0 / m - 1.0).max(0.0),
        BoundaryKind::DeepOtm => 0.0,
        BoundaryKind::LowerBound => (1.0 / m - (-r * tau).exp()).max(0.0),
    }
}

/// `n` boundary pairs cycling through the three kinds.
pub fn boundary_pairs(bx: &CollocBox, n: usize, r: f64, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = rng_for(seed, stream::BOUNDARY);
    let mut x = Array2::zeros((n, 3));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (kind, m, tau) = match i % 3 {
            0 => (BoundaryKind::Intrinsic, rng.gen_range(bx.m.0..bx.m.1), BOUNDARY_TAU),
            1 => (BoundaryKind::DeepOtm, rng.gen_range(1.5..2.0), rng.gen_range(BOUNDARY_TAU..0.05)),
            _ => (BoundaryKind::LowerBound, rng.gen_range(bx.m.0..bx.m.1), rng.gen_range(bx.tau.0..bx.tau.1)),
        };
        x[[i, 0]] = m;
        x[[i, 1]] = tau;
        x[[i, 2]] = r;
        y.push(boundary_target(kind, m, tau, r));
    }
    (x, y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub epoch: usize,
    pub l_data: f64,
    pub l_sk: f64,
    pub total: f64,
}

pub fn write_trace_csv<W: Write>(trace: &[TraceEntry], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "l_data", "l_sk", "total"])?;
    for t in trace {
        out.write_record([t.epoch.to_string(), t.l_data.to_string(), t.l_sk.to_string(), t.total.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// The data rows (panel plus optional boundary pairs) and collocation set a
/// run trains on.
pub struct TrainingData {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub colloc: Array2<f64>,
    pub colloc_r: f64,
}

impl TrainingData {
    pub fn build(cfg: &TrainConfig, panel: &OptionPanel) -> Result<TrainingData, TrainError> {
        if panel.is_empty() {
            return Err(TrainError::EmptyPanel);
        }
        let r = panel.median_r()?;
        TrainingData::with_r(cfg, panel.features(), panel.targets(), r)
    }

    pub fn with_r(cfg: &TrainConfig, mut x: Array2<f64>, mut y: Vec<f64>, r: f64) -> Result<TrainingData, TrainError> {
        if cfg.boundary {
            let (bx, by) = boundary_pairs(&cfg.colloc_box, BOUNDARY_POINTS, r, cfg.seed);
            x = concatenate(Axis(0), &[x.view(), bx.view()]).expect("three columns");
            y.extend(by);
        }
        let n = if cfg.lambda_sk > 0.0 { cfg.n_colloc } else { 0 };
        Ok(TrainingData {
            x,
            y,
            colloc: collocation_points(&cfg.colloc_box, n, r, cfg.seed),
            colloc_r: r,
        })
    }

    pub fn objective<'a>(&self, cfg: &TrainConfig, repr: &'a Representation) -> Result<Objective<'a>, TrainError> {
        let mlp = cfg.mlp.clone().with_seed(cfg.init_seed());
        Objective::new(repr, mlp, self.x.clone(), self.y.clone(), self.colloc.clone(), cfg.lambda_sk)
    }
}

/// Trains on `panel`.
pub fn train_skinn(cfg: &TrainConfig, repr: &Representation, panel: &OptionPanel) -> Result<FittedModel, TrainError> {
    train_skinn_observed(cfg, repr, panel, |_, _| {})
}

/// As [`train_skinn`], calling `observe(epoch, raw_phi)` before every update.
pub fn train_skinn_observed<F>(cfg: &TrainConfig, repr: &Representation, panel: &OptionPanel, observe: F) -> Result<FittedModel, TrainError>
where
    F: FnMut(usize, &[f64]),
{
    let data = TrainingData::build(cfg, panel)?;
    train_on(cfg, repr, &data, observe)
}

pub fn train_on<F>(cfg: &TrainConfig, repr: &Representation, data: &TrainingData, mut observe: F) -> Result<FittedModel, TrainError>
where
    F: FnMut(usize, &[f64]),
{
    cfg.validate()?;
    if repr.id() != cfg.repr {
        return Err(TrainError::Config(format!("config names {} but the representation is {}", cfg.repr, repr.id())));
    }
    let obj = data.objective(cfg, repr)?;
    let p = obj.nn_len();
    let mut v = crate::nn::MlpParams::init(&cfg.mlp.clone().with_seed(cfg.init_seed()))?.flat().to_vec();
    v.extend(repr.raw_init());
    let mut opt = Adam::with_betas(v.len(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (parts, grad) = obj.loss_and_grad(&v)?;
        check_parts(epoch, &parts)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::NonFinite { epoch, component: "gradient" });
        }
        trace.push(TraceEntry {
            epoch,
            l_data: parts.data,
            l_sk: parts.sk,
            total: parts.total,
        });
        observe(epoch, &v[p..]);
        opt.step(&mut v, &grad);
    }
    let last = obj.loss(&v)?;
    check_parts(cfg.epochs, &last)?;
    observe(cfg.epochs, &v[p..]);
    FittedModel::assemble(cfg.clone(), repr, v, data.colloc_r, last, trace)
}

/// Network outputs for rows of (m, τ, r).
pub fn network_ratio(params: &MlpParams, x: ArrayView2<'_, f64>) -> Result<Vec<f64>, TrainError> {
    Ok(params.forward_batch(network_inputs(x).view())?.output_column(0))
}

/// Fits the network alone with the structural side held fixed: minimises
/// mean (f(xᵢ) − yᵢ)² + λ·mean (f(cⱼ) − gⱼ)², where `g` holds the structural
/// values at the collocation rows `colloc`.
pub fn fit_fixed_signal(
    cfg: &TrainConfig,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    colloc: ArrayView2<'_, f64>,
    g: &[f64],
) -> Result<MlpParams, TrainError> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(TrainError::EmptyPanel);
    }
    if x.nrows() != y.len() || colloc.nrows() != g.len() || x.ncols() != 3 || colloc.ncols() != 3 {
        return Err(TrainError::Config("observation and collocation shapes disagree".into()));
    }
    if cfg.lambda_sk > 0.0 && g.is_empty() {
        return Err(TrainError::Config("lambda > 0 needs collocation points".into()));
    }
    let (xi, ci) = (network_inputs(x), network_inputs(colloc));
    let mut params = MlpParams::init(&cfg.mlp.clone().with_seed(cfg.init_seed()))?;
    let mut opt = Adam::with_betas(params.len(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let (n, m) = (y.len() as f64, g.len() as f64);
    for epoch in 0..cfg.epochs {
        let fwd = params.forward_batch(xi.view())?;
        let d = Array2::from_shape_fn((y.len(), 1), |(i, _)| 2.0 * (fwd.output()[[i, 0]] - y[i]) / n);
        let (mut grad, _) = params.backward_batch(&fwd, d.view());
        if cfg.lambda_sk > 0.0 {
            let cf = params.forward_batch(ci.view())?;
            let lam = cfg.lambda_sk;
            let d = Array2::from_shape_fn((g.len(), 1), |(j, _)| 2.0 * lam * (cf.output()[[j, 0]] - g[j]) / m);
            for (a, b) in grad.iter_mut().zip(params.backward_batch(&cf, d.view()).0) {
                *a += b;
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NonFinite { epoch, component: "gradient" });
        }
        opt.step(params.flat_mut(), &grad);
    }
    Ok(params)
}

fn check_parts(epoch: usize, p: &LossParts) -> Result<(), TrainError> {
    if !p.data.is_finite() {
        return Err(TrainError::NonFinite { epoch, component: "data loss" });
    }
    if !p.sk.is_finite() {
        return Err(TrainError::NonFinite {
            epoch,
            component: "structured-knowledge loss",
        });
    }
    Ok(())
}
