//! Per-point error functions, guidance, and timestep weighting.

use serde::{Deserialize, Serialize};

use crate::data::is_spatial;
use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    SquaredL2,
    L1,
    /// `r^2` for `|r| < 1` and `|r|` otherwise. Unlike the textbook Huber
    /// loss this has no factor of one half and jumps at `|r| = 1`.
    Huber,
}

impl LossKind {
    fn apply(self, r: f64) -> f64 {
        match self {
            LossKind::SquaredL2 => r * r,
            LossKind::L1 => r.abs(),
            LossKind::Huber => {
                if r.abs() < 1.0 {
                    r * r
                } else {
                    r.abs()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Unweighted per-point loss (the default).
    #[default]
    UniformL2,
    /// Variational-bound weighting of squared residuals by the inverse
    /// predicted reverse-step variance. Needs a variance-capable denoiser.
    Vlb,
    /// `UniformL2 + Vlb` per point.
    Sum,
}

impl ObjectiveKind {
    pub fn needs_variance(self) -> bool {
        matches!(self, ObjectiveKind::Vlb | ObjectiveKind::Sum)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GuidanceConfig {
    pub enabled: bool,
    pub w: f64,
}

impl GuidanceConfig {
    pub fn weight(w: f64) -> Self {
        Self { enabled: true, w }
    }

    /// Whether the unconditional prediction is needed at all.
    pub fn is_active(&self) -> bool {
        self.enabled && self.w != 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && !(self.w >= 0.0 && self.w.is_finite()) {
            return Err(Error::config("guidance.w", format!("must be finite and >= 0, got {}", self.w)));
        }
        Ok(())
    }
}

/// `(1 + w) eps_cond - w eps_uncond`. Returns `eps_cond` unchanged for `w = 0`.
pub fn apply_guidance(eps_cond: &[f64], eps_uncond: &[f64], w: f64) -> Result<Vec<f64>> {
    if eps_cond.len() != eps_uncond.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![eps_cond.len()],
            actual: vec![eps_uncond.len()],
        });
    }
    if !(w >= 0.0) {
        return Err(Error::config("guidance.w", "must be non-negative"));
    }
    if w == 0.0 {
        return Ok(eps_cond.to_vec());
    }
    Ok(eps_cond
        .iter()
        .zip(eps_uncond)
        .map(|(c, u)| (1.0 + w) * c - w * u)
        .collect())
}

/// Flat indices of the `[crop:-crop, crop:-crop]` window of a spatial tensor,
/// or `None` for the full tensor.
pub(crate) fn crop_indices(shape: &[usize], crop: usize) -> Result<Option<Vec<usize>>> {
    if crop == 0 {
        return Ok(None);
    }
    if !is_spatial(shape) {
        return Err(Error::config("crop", "cropping needs an [H, W] or [H, W, C] tensor"));
    }
    let (h, w) = (shape[0], shape[1]);
    let c = shape.get(2).copied().unwrap_or(1);
    if 2 * crop >= h.min(w) {
        return Err(Error::config(
            "crop",
            format!("crop {crop} leaves nothing of a {h}x{w} tensor"),
        ));
    }
    let mut idx = Vec::with_capacity((h - 2 * crop) * (w - 2 * crop) * c);
    for i in crop..h - crop {
        for j in crop..w - crop {
            for k in 0..c {
                idx.push((i * w + j) * c + k);
            }
        }
    }
    Ok(Some(idx))
}

fn check_lengths(eps: &[f64], eps_hat: &[f64], shape: &[usize]) -> Result<()> {
    let n: usize = shape.iter().product();
    if eps.len() != eps_hat.len() || eps.len() != n {
        return Err(Error::ShapeMismatch {
            expected: shape.to_vec(),
            actual: vec![eps.len(), eps_hat.len()],
        });
    }
    Ok(())
}

/// Weighted mean of `f(eps_i - eps_hat_i, i)` over the (cropped) elements.
fn reduce(eps: &[f64], eps_hat: &[f64], window: Option<&[usize]>, f: impl Fn(f64, usize) -> f64) -> f64 {
    match window {
        None => {
            let sum: f64 = eps.iter().zip(eps_hat).enumerate().map(|(i, (e, h))| f(e - h, i)).sum();
            sum / eps.len() as f64
        }
        Some(idx) => {
            let sum: f64 = idx.iter().map(|&i| f(eps[i] - eps_hat[i], i)).sum();
            sum / idx.len() as f64
        }
    }
}

/// Mean elementwise loss of `eps - eps_hat`, restricted to the centre window
/// when `crop > 0`.
pub fn eps_error(eps: &[f64], eps_hat: &[f64], shape: &[usize], loss: LossKind, crop: usize) -> Result<f64> {
    check_lengths(eps, eps_hat, shape)?;
    let window = crop_indices(shape, crop)?;
    Ok(reduce(eps, eps_hat, window.as_deref(), |r, _| loss.apply(r)))
}

/// Reverse-step variance used in place of a learned one, `beta_tilde_t`.
/// At `t = 1`, where `beta_tilde_1 = 0`, the value at `t = 2` is used.
fn fixed_variance(t: usize, sched: &NoiseSchedule) -> f64 {
    if t == 1 {
        sched.posterior_variance(2)
    } else {
        sched.posterior_variance(t)
    }
}

/// Coefficient `beta_t^2 / (2 alpha_t (1 - alpha_bar_t))` shared by every
/// variational-bound weight.
fn vlb_coefficient(t: usize, sched: &NoiseSchedule) -> f64 {
    let beta = sched.beta(t);
    beta * beta / (2.0 * sched.alpha(t) * (1.0 - sched.alpha_bar(t)))
}

/// Variational-bound weight `beta_t^2 / (2 sigma_t^2 alpha_t (1 - alpha_bar_t))`
/// with the fixed small variance `sigma_t^2 = beta_tilde_t`.
pub fn vlb_weight(t: usize, sched: &NoiseSchedule) -> Result<f64> {
    sched.check_timestep(t)?;
    Ok(vlb_coefficient(t, sched) / fixed_variance(t, sched))
}

/// Variational-bound error: squared residuals weighted elementwise by
/// `beta_t^2 / (2 v_i alpha_t (1 - alpha_bar_t))`, averaged like `eps_error`.
pub fn vlb_error(
    eps: &[f64],
    eps_hat: &[f64],
    variance: &[f64],
    t: usize,
    sched: &NoiseSchedule,
    shape: &[usize],
    crop: usize,
) -> Result<f64> {
    check_lengths(eps, eps_hat, shape)?;
    check_lengths(eps, variance, shape)?;
    sched.check_timestep(t)?;
    if variance.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Numeric(format!("non-positive predicted variance at t = {t}")));
    }
    let coef = vlb_coefficient(t, sched);
    let window = crop_indices(shape, crop)?;
    Ok(reduce(eps, eps_hat, window.as_deref(), |r, i| coef * r * r / variance[i]))
}
