//! Noise-prediction models `eps_theta(x_t, t, c)`.

mod gaussian;
mod mlp;
mod train;

pub use gaussian::{ClassConditional, GaussianClassModel, GaussianComponent};
pub use mlp::{
    finite_diff_gradcheck, timestep_embedding, Activation, GradcheckReport, MlpConfig, MlpDenoiser, TensorSpec,
    TrainingExample,
};
pub use train::{train_denoiser, LossPoint, TrainConfig, TrainOutcome};

use crate::error::Result;
use crate::schedule::NoiseSchedule;

/// The noise-prediction contract used by the classifier.
///
/// `class = None` asks for the unconditional prediction. Implementations must
/// be deterministic in their inputs and return a vector of the input length.
pub trait Denoiser: Send + Sync {
    /// Length of the flattened inputs this denoiser accepts.
    fn dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    fn supports_unconditional(&self) -> bool;

    fn predict_eps(
        &self,
        x_t: &[f64],
        t: usize,
        class: Option<usize>,
        sched: &NoiseSchedule,
    ) -> Result<Vec<f64>>;

    /// Whether `predict_variance` is available.
    fn supports_variance(&self) -> bool {
        false
    }

    /// Per-element variance of the reverse step `x_{t-1} | x_t, c`.
    fn predict_variance(
        &self,
        _x_t: &[f64],
        _t: usize,
        _class: Option<usize>,
        _sched: &NoiseSchedule,
    ) -> Result<Vec<f64>> {
        Err(crate::Error::Unsupported(
            "this denoiser does not predict variances".into(),
        ))
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn supports_unconditional(&self) -> bool {
        (**self).supports_unconditional()
    }
    fn predict_eps(&self, x_t: &[f64], t: usize, class: Option<usize>, sched: &NoiseSchedule) -> Result<Vec<f64>> {
        (**self).predict_eps(x_t, t, class, sched)
    }
    fn supports_variance(&self) -> bool {
        (**self).supports_variance()
    }
    fn predict_variance(&self, x_t: &[f64], t: usize, class: Option<usize>, sched: &NoiseSchedule) -> Result<Vec<f64>> {
        (**self).predict_variance(x_t, t, class, sched)
    }
}
