//! Zero-shot classification with class-conditional diffusion denoisers.
//!
//! A point `x` is assigned to the class whose conditional denoiser best
//! predicts the noise added to it, averaged over sampled `(t, eps)` pairs.
//! The crate ships an analytic Gaussian-mixture denoiser with exact oracles,
//! a small trainable MLP denoiser, naive and adaptive classifiers, and an
//! experiment harness.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod classifier;
pub mod config;
pub mod data;
pub mod denoiser;
pub mod error;
pub mod harness;
pub mod noise;
pub mod oracle;
pub mod run;
pub mod schedule;
pub mod seed;
pub mod strategy;

pub use classifier::{
    classify_adaptive, classify_naive, ClassificationResult, ClassifierOptions, GuidanceConfig, LossKind,
    ObjectiveKind,
};
pub use data::DataPoint;
pub use denoiser::{Denoiser, GaussianClassModel, MlpDenoiser};
pub use error::{Error, Result};
pub use noise::NoiseVariant;
pub use schedule::{NoiseSchedule, ScheduleKind};
pub use strategy::{StagePlan, TimestepStrategy};
