//! A small fully connected noise-prediction network.
//!
//! The network sees `concat(x_t, emb(t) + class_row(c))`, where `emb` is a
//! fixed sinusoidal timestep embedding and `class_row` a learned table with
//! one row per class and, when unconditional prediction is enabled, a
//! trailing null row.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Denoiser;
use crate::error::{Error, Result};
use crate::schedule::{forward_noise, NoiseSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Silu,
    /// No nonlinearity; the network is linear in its input.
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Silu => z / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub dim: usize,
    pub num_classes: usize,
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
    /// Adds a null class row so `class = None` is accepted.
    pub unconditional: bool,
    #[serde(default)]
    pub activation: Activation,
    /// Start the output layer at zero, so every prediction is initially zero.
    #[serde(default)]
    pub zero_init_output: bool,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("denoiser.dim", "must be positive"));
        }
        if self.num_classes == 0 {
            return Err(Error::config("denoiser.num_classes", "must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config(
                "denoiser.hidden",
                "need at least one hidden layer, each with positive width",
            ));
        }
        if self.embed_dim == 0 {
            return Err(Error::config("denoiser.embed_dim", "must be positive"));
        }
        Ok(())
    }

    fn table_rows(&self) -> usize {
        self.num_classes + usize::from(self.unconditional)
    }
}

/// Name, shape and location of one parameter tensor in the flat buffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    weight: usize,
    bias: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpDenoiser {
    config: MlpConfig,
    params: Vec<f64>,
    layers: Vec<Layer>,
    table: usize,
}

/// Per-layer inputs and pre-activations recorded by a forward pass.
struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl MlpDenoiser {
    /// Randomly initialised network.
    pub fn new<R: Rng + ?Sized>(config: MlpConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        for (i, layer) in net.layers.clone().iter().enumerate() {
            let last = i + 1 == net.layers.len();
            if last && net.config.zero_init_output {
                continue;
            }
            let std = (1.0 / layer.fan_in as f64).sqrt();
            for w in &mut net.params[layer.weight..layer.weight + layer.fan_in * layer.fan_out] {
                *w = std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let table_len = net.config.table_rows() * net.config.embed_dim;
        for w in &mut net.params[net.table..net.table + table_len] {
            *w = rng.sample::<f64, _>(StandardNormal);
        }
        Ok(net)
    }

    /// Network with every parameter set to zero.
    pub fn zeroed(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut widths = vec![config.dim + config.embed_dim];
        widths.extend(&config.hidden);
        widths.push(config.dim);
        let mut offset = 0;
        let layers: Vec<Layer> = widths
            .windows(2)
            .map(|w| {
                let layer = Layer {
                    weight: offset,
                    bias: offset + w[0] * w[1],
                    fan_in: w[0],
                    fan_out: w[1],
                };
                offset += w[0] * w[1] + w[1];
                layer
            })
            .collect();
        let table = offset;
        offset += config.table_rows() * config.embed_dim;
        Ok(Self {
            config,
            params: vec![0.0; offset],
            layers,
            table,
        })
    }

    /// Rebuilds a network from its configuration and flat parameter buffer.
    pub fn from_parts(config: MlpConfig, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeroed(config)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![net.params.len()],
                actual: vec![params.len()],
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite network parameter".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Parameter tensors in storage order.
    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let mut specs = Vec::with_capacity(2 * self.layers.len() + 1);
        for (i, l) in self.layers.iter().enumerate() {
            specs.push(TensorSpec {
                name: format!("layers.{i}.weight"),
                shape: vec![l.fan_out, l.fan_in],
                offset: l.weight,
            });
            specs.push(TensorSpec {
                name: format!("layers.{i}.bias"),
                shape: vec![l.fan_out],
                offset: l.bias,
            });
        }
        specs.push(TensorSpec {
            name: "class_embedding".into(),
            shape: vec![self.config.table_rows(), self.config.embed_dim],
            offset: self.table,
        });
        specs
    }

    fn class_row(&self, class: Option<usize>) -> Result<usize> {
        match class {
            Some(c) if c < self.config.num_classes => Ok(c),
            Some(c) => Err(Error::ClassOutOfRange {
                class: c,
                num_classes: self.config.num_classes,
            }),
            None if self.config.unconditional => Ok(self.config.num_classes),
            None => Err(Error::Unsupported("network was built without a null class".into())),
        }
    }

    fn input(&self, x_t: &[f64], t: usize, row: usize) -> Vec<f64> {
        let e = self.config.embed_dim;
        let mut input = Vec::with_capacity(x_t.len() + e);
        input.extend_from_slice(x_t);
        let table = &self.params[self.table + row * e..self.table + (row + 1) * e];
        input.extend(timestep_embedding(t, e).iter().zip(table).map(|(a, b)| a + b));
        input
    }

    fn forward(&self, input: Vec<f64>, mut trace: Option<&mut Trace>) -> Vec<f64> {
        let act = self.config.activation;
        let mut h = input;
        for (i, l) in self.layers.iter().enumerate() {
            let w = &self.params[l.weight..l.weight + l.fan_in * l.fan_out];
            let b = &self.params[l.bias..l.bias + l.fan_out];
            let z: Vec<f64> = w
                .chunks_exact(l.fan_in)
                .zip(b)
                .map(|(row, bias)| bias + row.iter().zip(&h).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            let last = i + 1 == self.layers.len();
            let next = if last { z.clone() } else { z.iter().map(|&v| act.apply(v)).collect() };
            if let Some(tr) = trace.as_deref_mut() {
                tr.inputs.push(h);
                tr.pre.push(z);
            }
            h = next;
        }
        h
    }

    fn check_input(&self, x_t: &[f64], t: usize) -> Result<()> {
        if x_t.len() != self.config.dim {
            return Err(Error::ShapeMismatch {
                expected: vec![self.config.dim],
                actual: vec![x_t.len()],
            });
        }
        if t == 0 {
            return Err(Error::TimestepOutOfRange { t, steps: usize::MAX });
        }
        Ok(())
    }

    /// Forward pass without a schedule; `t` is the 1-indexed timestep.
    pub fn predict(&self, x_t: &[f64], t: usize, class: Option<usize>) -> Result<Vec<f64>> {
        self.check_input(x_t, t)?;
        let row = self.class_row(class)?;
        Ok(self.forward(self.input(x_t, t, row), None))
    }

    /// Mean squared noise-prediction loss of one training example, adding its
    /// parameter gradient into `grad`.
    pub fn loss_and_gradient(
        &self,
        example: &TrainingExample<'_>,
        sched: &NoiseSchedule,
        grad: &mut [f64],
    ) -> Result<f64> {
        let x_t = forward_noise(example.x0, example.t, example.eps, sched)?;
        self.check_input(&x_t, example.t)?;
        let row = self.class_row(example.class)?;
        let mut trace = Trace {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let out = self.forward(self.input(&x_t, example.t, row), Some(&mut trace));
        let d = out.len() as f64;
        let mut loss = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(example.eps)
            .map(|(o, e)| {
                let r = o - e;
                loss += r * r;
                2.0 * r / d
            })
            .collect();
        let act = self.config.activation;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[i];
            for (j, dj) in delta.iter().enumerate() {
                let g = &mut grad[l.weight + j * l.fan_in..l.weight + (j + 1) * l.fan_in];
                for (gk, xk) in g.iter_mut().zip(input) {
                    *gk += dj * xk;
                }
                grad[l.bias + j] += dj;
            }
            let w = &self.params[l.weight..l.weight + l.fan_in * l.fan_out];
            let mut back = vec![0.0; l.fan_in];
            for (row, dj) in w.chunks_exact(l.fan_in).zip(&delta) {
                for (b, wk) in back.iter_mut().zip(row) {
                    *b += dj * wk;
                }
            }
            if i > 0 {
                for (b, z) in back.iter_mut().zip(&trace.pre[i - 1]) {
                    *b *= act.derivative(*z);
                }
            }
            delta = back;
        }
        let e = self.config.embed_dim;
        let table = self.table + row * e;
        for (g, dv) in grad[table..table + e].iter_mut().zip(&delta[self.config.dim..]) {
            *g += dv;
        }
        Ok(loss / d)
    }

    /// Loss of one training example without gradients.
    pub fn loss(&self, example: &TrainingExample<'_>, sched: &NoiseSchedule) -> Result<f64> {
        let x_t = forward_noise(example.x0, example.t, example.eps, sched)?;
        let pred = self.predict(&x_t, example.t, example.class)?;
        Ok(pred.iter().zip(example.eps).map(|(p, e)| (p - e) * (p - e)).sum::<f64>() / pred.len() as f64)
    }
}

/// One `(x_0, t, eps, c)` training example.
#[derive(Debug, Clone, Copy)]
pub struct TrainingExample<'a> {
    pub x0: &'a [f64],
    pub t: usize,
    pub eps: &'a [f64],
    pub class: Option<usize>,
}

/// Sinusoidal embedding of the raw timestep index.
pub fn timestep_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half.max(1) as f64).exp();
        let angle = t as f64 * freq;
        out[2 * i] = angle.sin();
        out[2 * i + 1] = angle.cos();
    }
    out
}

impl Denoiser for MlpDenoiser {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    fn supports_unconditional(&self) -> bool {
        self.config.unconditional
    }

    fn predict_eps(&self, x_t: &[f64], t: usize, class: Option<usize>, sched: &NoiseSchedule) -> Result<Vec<f64>> {
        sched.check_timestep(t)?;
        self.predict(x_t, t, class)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub num_params: usize,
    pub max_relative_deviation: f64,
    /// Index of the parameter with the largest deviation.
    pub worst_param: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares backpropagated gradients of the noise-prediction loss with
/// central finite differences of step `h`, over every parameter.
///
/// Relative deviation is `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`.
pub fn finite_diff_gradcheck(
    net: &MlpDenoiser,
    example: &TrainingExample<'_>,
    sched: &NoiseSchedule,
    h: f64,
    tolerance: f64,
) -> Result<GradcheckReport> {
    let mut analytic = vec![0.0; net.num_params()];
    net.loss_and_gradient(example, sched, &mut analytic)?;
    let mut probe = net.clone();
    let mut worst = (0.0_f64, 0usize);
    for (i, &a) in analytic.iter().enumerate() {
        let original = probe.params[i];
        probe.params[i] = original + h;
        let up = probe.loss(example, sched)?;
        probe.params[i] = original - h;
        let down = probe.loss(example, sched)?;
        probe.params[i] = original;
        let numeric = (up - down) / (2.0 * h);
        let scale = a.abs().max(numeric.abs()).max(1e-6);
        let dev = (a - numeric).abs() / scale;
        if dev > worst.0 {
            worst = (dev, i);
        }
    }
    Ok(GradcheckReport {
        num_params: net.num_params(),
        max_relative_deviation: worst.0,
        worst_param: worst.1,
        tolerance,
        passed: worst.0 < tolerance,
    })
}
