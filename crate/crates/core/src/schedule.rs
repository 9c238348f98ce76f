//! Discrete noise schedules and the forward noising process.
//!
//! Timesteps are 1-indexed: `t = 1` is the least noisy step and `t = T` the
//! noisiest. Storage is 0-indexed internally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

const COSINE_OFFSET: f64 = 0.008;
const MAX_COSINE_BETA: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Linear,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub steps: usize,
    /// Linear schedule endpoints; ignored by the cosine schedule.
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Linear,
            steps: DEFAULT_STEPS,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
        }
    }
}

/// Immutable diffusion schedule holding `beta_t` and `alpha_bar_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Schedule of the given kind with the default linear endpoints.
    pub fn new(kind: ScheduleKind, steps: usize) -> Result<Self> {
        Self::from_config(&ScheduleConfig {
            kind,
            steps,
            ..ScheduleConfig::default()
        })
    }

    pub fn linear(steps: usize) -> Result<Self> {
        Self::new(ScheduleKind::Linear, steps)
    }

    pub fn from_config(config: &ScheduleConfig) -> Result<Self> {
        let steps = config.steps;
        if steps < 2 {
            return Err(Error::config("schedule.steps", format!("need at least 2 steps, got {steps}")));
        }
        let betas = match config.kind {
            ScheduleKind::Linear => {
                let (start, end) = (config.beta_start, config.beta_end);
                if !(start > 0.0 && start <= end && end < 1.0) {
                    return Err(Error::config(
                        "schedule.beta_start",
                        format!("need 0 < beta_start <= beta_end < 1, got {start} and {end}"),
                    ));
                }
                let span = (steps - 1) as f64;
                (0..steps)
                    .map(|i| start + (end - start) * i as f64 / span)
                    .collect::<Vec<_>>()
            }
            ScheduleKind::Cosine => {
                let f = |t: f64| {
                    let phase = (t / steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET);
                    (phase * std::f64::consts::FRAC_PI_2).cos().powi(2)
                };
                (1..=steps)
                    .map(|t| (1.0 - f(t as f64) / f(t as f64 - 1.0)).clamp(1e-8, MAX_COSINE_BETA))
                    .collect()
            }
        };
        let mut alpha_bars = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for beta in &betas {
            acc *= 1.0 - beta;
            alpha_bars.push(acc);
        }
        Ok(Self {
            kind: config.kind,
            betas,
            alpha_bars,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn check_timestep(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            Err(Error::TimestepOutOfRange {
                t,
                steps: self.steps(),
            })
        } else {
            Ok(())
        }
    }

    /// `beta_t`. Panics if `t` is outside `[1, T]`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// `alpha_t = 1 - beta_t`.
    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta(t)
    }

    /// `alpha_bar_t`. Panics if `t` is outside `[1, T]`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    /// `alpha_bar_{t-1}`, with `alpha_bar_0 = 1`.
    pub fn alpha_bar_prev(&self, t: usize) -> f64 {
        if t <= 1 {
            1.0
        } else {
            self.alpha_bars[t - 2]
        }
    }

    /// Posterior variance `(1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t`
    /// of `x_{t-1}` given `x_t` and `x_0`. Zero at `t = 1`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar_prev(t)) / (1.0 - self.alpha_bar(t)) * self.beta(t)
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }
}

/// `x_t = sqrt(alpha_bar_t) * x + sqrt(1 - alpha_bar_t) * eps`, elementwise.
pub fn forward_noise(x: &[f64], t: usize, eps: &[f64], sched: &NoiseSchedule) -> Result<Vec<f64>> {
    sched.check_timestep(t)?;
    if x.len() != eps.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![x.len()],
            actual: vec![eps.len()],
        });
    }
    let ab = sched.alpha_bar(t);
    let (signal, noise) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x.iter().zip(eps).map(|(xi, ei)| signal * xi + noise * ei).collect())
}
