//! Fully connected feed-forward networks.
//!
//! Parameters are one flat vector; [`LayerShape`] records where each layer's
//! weight matrix (row-major, `fan_out × fan_in`) and bias vector live. The same
//! parameters can be evaluated three ways:
//!
//! * on a [`Tape`] with the parameters as variables ([`MlpParams::forward_vars`]),
//! * on a tape with frozen weights and differentiable inputs ([`MlpParams::forward_frozen`]),
//! * batched in plain `f64` with a hand-written backward pass ([`MlpParams::forward_batch`]),
//!   which is what the optimiser uses.

mod batch;
mod io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdError, Tape, Var};

pub use batch::BatchForward;
pub use io::{read_params, write_params};
pub(crate) use io::read_line;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("autodiff: {0}")]
    Ad(#[from] AdError),
    #[error("parameter file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Silu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Silu => "silu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Some(Activation::Relu),
            "silu" => Some(Activation::Silu),
            _ => None,
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Silu => x * crate::autodiff::special::sigmoid(x),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Silu => {
                let s = crate::autodiff::special::sigmoid(x);
                s + x * s * (1.0 - s)
            }
        }
    }

    #[inline]
    fn on_tape(self, v: Var<'_>) -> Var<'_> {
        match self {
            Activation::Relu => v.max0(),
            Activation::Silu => v.silu(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for MlpConfig {
    /// Three hidden layers of 32 ReLU units on (m, τ, r) with a scalar output.
    fn default() -> Self {
        MlpConfig {
            input_dim: 3,
            hidden_layers: 3,
            hidden_width: 32,
            output_dim: 1,
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_layers: usize, hidden_width: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden_layers,
            hidden_width,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_output_dim(mut self, output_dim: usize) -> Self {
        self.output_dim = output_dim;
        self
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 || self.hidden_layers == 0 || self.hidden_width == 0 || self.output_dim == 0 {
            return Err(NnError::Config(format!(
                "all dimensions must be positive (input {}, layers {}, width {}, output {})",
                self.input_dim, self.hidden_layers, self.hidden_width, self.output_dim
            )));
        }
        Ok(())
    }

    fn shapes(&self) -> Vec<LayerShape> {
        let mut dims = vec![self.input_dim];
        dims.extend(std::iter::repeat(self.hidden_width).take(self.hidden_layers));
        dims.push(self.output_dim);
        let mut offset = 0;
        dims.windows(2)
            .map(|w| {
                let s = LayerShape {
                    fan_in: w[0],
                    fan_out: w[1],
                    offset,
                };
                offset += s.len();
                s
            })
            .collect()
    }

    /// Σ_l (fan_in·fan_out + fan_out).
    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(LayerShape::len).sum()
    }
}

/// Location of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn len(&self) -> usize {
        self.fan_in * self.fan_out + self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    pub fn biases(&self) -> std::ops::Range<usize> {
        let s = self.offset + self.fan_in * self.fan_out;
        s..s + self.fan_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    config: MlpConfig,
    layers: Vec<LayerShape>,
    flat: Vec<f64>,
}

impl MlpParams {
    /// Kaiming-uniform weights, U(−√(6/fan_in), √(6/fan_in)), and zero biases.
    pub fn init(config: &MlpConfig) -> Result<Self, NnError> {
        config.validate()?;
        let layers = config.shapes();
        let mut flat = vec![0.0; config.param_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for l in &layers {
            let bound = (6.0 / l.fan_in as f64).sqrt();
            for w in &mut flat[l.weights()] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(MlpParams {
            config: config.clone(),
            layers,
            flat,
        })
    }

    /// Wraps an existing flat vector.
    pub fn from_flat(config: &MlpConfig, flat: Vec<f64>) -> Result<Self, NnError> {
        config.validate()?;
        let expected = config.param_count();
        if flat.len() != expected {
            return Err(NnError::Dimension {
                expected,
                got: flat.len(),
            });
        }
        Ok(MlpParams {
            config: config.clone(),
            layers: config.shapes(),
            flat,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    fn check_input(&self, n: usize) -> Result<(), NnError> {
        if n != self.config.input_dim {
            return Err(NnError::Dimension {
                expected: self.config.input_dim,
                got: n,
            });
        }
        Ok(())
    }

    /// Forward pass with the parameters themselves on the tape. `theta` must
    /// hold one variable per flat parameter.
    pub fn forward_vars<'t>(&self, theta: &[Var<'t>], x: &[Var<'t>]) -> Result<Vec<Var<'t>>, NnError> {
        self.check_input(x.len())?;
        if theta.len() != self.flat.len() {
            return Err(NnError::Dimension {
                expected: self.flat.len(),
                got: theta.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut h: Vec<Var<'t>> = x.to_vec();
        for (li, l) in self.layers.iter().enumerate() {
            let w = &theta[l.weights()];
            let b = &theta[l.biases()];
            let tape = h[0].tape();
            h = (0..l.fan_out)
                .map(|o| {
                    let z = tape.dot(&w[o * l.fan_in..(o + 1) * l.fan_in], &h, b[o]);
                    if li < last {
                        self.config.activation.on_tape(z)
                    } else {
                        z
                    }
                })
                .collect();
        }
        Ok(h)
    }

    /// Forward pass with frozen weights; only the inputs are differentiable.
    pub fn forward_frozen<'t>(&self, x: &[Var<'t>]) -> Result<Vec<Var<'t>>, NnError> {
        self.check_input(x.len())?;
        let last = self.layers.len() - 1;
        let mut h: Vec<Var<'t>> = x.to_vec();
        for (li, l) in self.layers.iter().enumerate() {
            let w = &self.flat[l.weights()];
            let b = &self.flat[l.biases()];
            let tape = h[0].tape();
            h = (0..l.fan_out)
                .map(|o| {
                    let z = tape.dot_const(&h, &w[o * l.fan_in..(o + 1) * l.fan_in], b[o]);
                    if li < last {
                        self.config.activation.on_tape(z)
                    } else {
                        z
                    }
                })
                .collect();
        }
        Ok(h)
    }

    /// Plain evaluation at one input.
    pub fn forward_value(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x.len())?;
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (li, l) in self.layers.iter().enumerate() {
            let w = &self.flat[l.weights()];
            let b = &self.flat[l.biases()];
            h = (0..l.fan_out)
                .map(|o| {
                    let row = &w[o * l.fan_in..(o + 1) * l.fan_in];
                    let z = b[o] + row.iter().zip(&h).map(|(a, c)| a * c).sum::<f64>();
                    if li < last {
                        self.config.activation.apply(z)
                    } else {
                        z
                    }
                })
                .collect();
        }
        Ok(h)
    }
}

/// Lifts every parameter onto `tape` and evaluates the first output at `x`.
pub fn mlp_forward<'t>(tape: &'t Tape, params: &MlpParams, x: &[f64]) -> Result<(Var<'t>, Vec<Var<'t>>), NnError> {
    let theta = tape.vars(params.flat())?;
    let xs: Vec<Var<'t>> = x.iter().map(|&v| tape.constant(v)).collect();
    let out = params.forward_vars(&theta, &xs)?;
    tape.check()?;
    Ok((out[0], theta))
}

/// ∂f/∂xᵢ of the first network output at `x`.
pub fn mlp_input_grad(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>, NnError> {
    let tape = Tape::new();
    let xs = tape.vars(x)?;
    let out = params.forward_frozen(&xs)?;
    Ok(tape.grad(out[0], &xs)?)
}
