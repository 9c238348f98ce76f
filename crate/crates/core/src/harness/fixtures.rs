//! Committed fixtures shared by the tests, examples and reference configs.

use super::datasets::{DatasetSpec, GmmPreset, TemplateSet};
use crate::denoiser::{Activation, MlpConfig, TrainConfig};
use crate::schedule::{ScheduleConfig, DEFAULT_STEPS};

/// Four unit-variance classes in eight dimensions, pairwise six apart.
pub fn separated_gmm() -> DatasetSpec {
    DatasetSpec::Gmm(GmmPreset::Simplex {
        classes: 4,
        dim: 8,
        separation: 6.0,
        variance: 1.0,
    })
}

/// Per-class isotropic variances of [`standard_gmm`].
pub const STANDARD_VARIANCES: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// Four overlapping classes whose variances differ, so a classifier has to
/// weigh both location and spread.
pub fn standard_gmm() -> DatasetSpec {
    let dim = 8;
    let scale = 3.0 / std::f64::consts::SQRT_2;
    let means = (0..4)
        .map(|k| {
            let mut m = vec![0.0; dim];
            m[k] = scale;
            m
        })
        .collect();
    let variances = STANDARD_VARIANCES.iter().map(|&v| vec![v; dim]).collect();
    DatasetSpec::Gmm(GmmPreset::Explicit { means, variances })
}

/// Thirty-seven classes with random means and spreads in sixteen dimensions.
pub fn many_class_gmm() -> DatasetSpec {
    DatasetSpec::Gmm(GmmPreset::Random {
        classes: 37,
        dim: 16,
        spread: 1.0,
        min_variance: 0.5,
        max_variance: 1.0,
        model_seed: 37,
    })
}

/// Four 8x8 shape templates with pixel noise.
pub fn template_images() -> DatasetSpec {
    DatasetSpec::Templates {
        set: TemplateSet::Shapes,
        sigma: 0.4,
        clip: 2.0,
    }
}

/// Two pairs of 8x8 templates that rearrange the same parts.
pub fn compositional_images() -> DatasetSpec {
    DatasetSpec::Templates {
        set: TemplateSet::Compositional,
        sigma: 0.4,
        clip: 2.0,
    }
}

pub fn default_schedule() -> ScheduleConfig {
    ScheduleConfig {
        steps: DEFAULT_STEPS,
        ..ScheduleConfig::default()
    }
}

/// Denoiser used for the 8x8 template fixtures.
pub fn template_mlp(num_classes: usize) -> MlpConfig {
    MlpConfig {
        dim: 64,
        num_classes,
        hidden: vec![256, 256],
        embed_dim: 64,
        unconditional: true,
        activation: Activation::Silu,
        zero_init_output: true,
    }
}

pub fn template_training() -> TrainConfig {
    TrainConfig {
        steps: 3000,
        batch_size: 64,
        learning_rate: 1e-3,
        weight_decay: 0.0,
        p_uncond: 0.1,
        log_every: 100,
        seed: 0,
    }
}
