use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{MlpDenoiser, TrainingExample};
use crate::data::DataPoint;
use crate::error::{Error, Result};
use crate::noise::standard_normal;
use crate::schedule::NoiseSchedule;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Examples per gradient chunk; chunk sums are reduced in a fixed order.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Probability of replacing the label with the null class.
    pub p_uncond: f64,
    /// Record the window-averaged loss every this many steps.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 64,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            p_uncond: 0.1,
            log_every: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("train.steps", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("train.learning_rate", "must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.p_uncond) {
            return Err(Error::config("train.p_uncond", "must lie in [0, 1]"));
        }
        if self.log_every == 0 {
            return Err(Error::config("train.log_every", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: MlpDenoiser,
    pub trace: Vec<LossPoint>,
}

struct Sampled {
    index: usize,
    t: usize,
    eps: Vec<f64>,
    class: Option<usize>,
}

/// Fits the network to `E_{t, eps} ||eps - eps_theta(x_t, t, c)||^2` with
/// uniform timesteps and Adam. Deterministic for a fixed `config.seed`
/// regardless of thread count.
pub fn train_denoiser(
    net: MlpDenoiser,
    dataset: &[DataPoint],
    sched: &NoiseSchedule,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::config("dataset", "training set is empty"));
    }
    let dim = net.config().dim;
    let unconditional = net.config().unconditional;
    for p in dataset {
        if p.dim() != dim {
            return Err(Error::ShapeMismatch {
                expected: vec![dim],
                actual: vec![p.dim()],
            });
        }
        if p.label.is_none() {
            return Err(Error::config("dataset", "training points need labels"));
        }
    }

    let mut net = net;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = net.num_params();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut trace = Vec::with_capacity(config.steps / config.log_every + 1);
    let mut window = 0.0;

    for step in 1..=config.steps {
        let batch: Vec<Sampled> = (0..config.batch_size)
            .map(|_| {
                let index = rng.random_range(0..dataset.len());
                let t = rng.random_range(1..=sched.steps());
                let eps = standard_normal(dim, &mut rng);
                let drop = unconditional && config.p_uncond > 0.0 && rng.random::<f64>() < config.p_uncond;
                let class = if drop { None } else { dataset[index].label };
                Sampled { index, t, eps, class }
            })
            .collect();

        let net_ref = &net;
        let partials: Vec<Result<(Vec<f64>, f64)>> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grad = vec![0.0; n];
                let mut loss = 0.0;
                for s in chunk {
                    let ex = TrainingExample {
                        x0: &dataset[s.index].values,
                        t: s.t,
                        eps: &s.eps,
                        class: s.class,
                    };
                    loss += net_ref.loss_and_gradient(&ex, sched, &mut grad)?;
                }
                Ok((grad, loss))
            })
            .collect();

        let mut grad = vec![0.0; n];
        let mut loss = 0.0;
        for part in partials {
            let (g, l) = part?;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            loss += l;
        }
        let scale = 1.0 / config.batch_size as f64;
        loss *= scale;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }

        let lr = config.learning_rate;
        let bias1 = 1.0 - ADAM_BETA1.powi(step as i32);
        let bias2 = 1.0 - ADAM_BETA2.powi(step as i32);
        for (i, p) in net.params_mut().iter_mut().enumerate() {
            let g = grad[i] * scale;
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
            let update = (m[i] / bias1) / ((v[i] / bias2).sqrt() + ADAM_EPS);
            *p -= lr * (update + config.weight_decay * *p);
        }

        window += loss;
        if step % config.log_every == 0 {
            trace.push(LossPoint {
                step,
                loss: window / config.log_every as f64,
            });
            window = 0.0;
        }
    }
    Ok(TrainOutcome { net, trace })
}
