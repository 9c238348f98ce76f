//! Run configuration: a single JSON document with defaults for every field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierOptions, GuidanceConfig, LossKind, ObjectiveKind};
use crate::denoiser::{Activation, MlpConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::harness::{fixtures, BenchmarkConfig, DatasetSpec, PrunerConfig};
use crate::noise::NoiseVariant;
use crate::schedule::{NoiseSchedule, ScheduleConfig};
use crate::seed::{derive_seed, streams};
use crate::strategy::{validate_plan, StagePlan, TimestepStrategy};

/// Which denoiser a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DenoiserSpec {
    /// Exact denoiser of the dataset's generating Gaussian mixture.
    #[default]
    Analytic,
    /// Trainable network; `dim` and `num_classes` come from the dataset.
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_embed")]
        embed_dim: usize,
        #[serde(default = "yes")]
        unconditional: bool,
        #[serde(default)]
        activation: Activation,
        #[serde(default = "yes")]
        zero_init_output: bool,
        #[serde(default)]
        train: TrainConfig,
        /// Load weights from here instead of training.
        #[serde(default)]
        checkpoint: Option<PathBuf>,
    },
}

fn default_hidden() -> Vec<usize> {
    vec![256, 256]
}

fn default_embed() -> usize {
    64
}

fn yes() -> bool {
    true
}

impl DenoiserSpec {
    pub fn supports_variance(&self) -> bool {
        matches!(self, DenoiserSpec::Analytic)
    }

    pub fn supports_unconditional(&self) -> bool {
        match self {
            DenoiserSpec::Analytic => true,
            DenoiserSpec::Mlp { unconditional, .. } => *unconditional,
        }
    }

    /// Network configuration for data of dimension `dim`.
    pub fn mlp_config(&self, dim: usize, num_classes: usize) -> Option<MlpConfig> {
        match self {
            DenoiserSpec::Analytic => None,
            DenoiserSpec::Mlp {
                hidden,
                embed_dim,
                unconditional,
                activation,
                zero_init_output,
                ..
            } => Some(MlpConfig {
                dim,
                num_classes,
                hidden: hidden.clone(),
                embed_dim: *embed_dim,
                unconditional: *unconditional,
                activation: *activation,
                zero_init_output: *zero_init_output,
            }),
        }
    }
}

/// Parameters of the studies behind the experiment subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub scaling_strategies: Vec<TimestepStrategy>,
    pub scaling_budgets: Vec<usize>,
    /// Interior timesteps of the per-timestep sweep; `1` and `T` are added.
    pub sweep_points: usize,
    pub variance_inputs: usize,
    pub variance_sets: usize,
    pub variance_set_size: usize,
    /// Trials per image-caption pair for compositional score matrices.
    pub winoground_trials: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            scaling_strategies: vec![
                TimestepStrategy::UniformRandom,
                TimestepStrategy::EvenlySpaced { count: 10 },
                TimestepStrategy::FixedSingle { t: 500 },
                TimestepStrategy::Window {
                    center: 500,
                    halfwidth: 25,
                },
            ],
            scaling_budgets: vec![10, 20, 50, 100, 200, 500, 1000],
            sweep_points: 10,
            variance_inputs: 100,
            variance_sets: 64,
            variance_set_size: 16,
            winoground_trials: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schedule: ScheduleConfig,
    pub dataset: DatasetSpec,
    /// Test samples per class.
    pub samples_per_class: usize,
    /// Training samples per class, used only when a network is trained.
    pub train_samples_per_class: usize,
    pub denoiser: DenoiserSpec,
    pub strategy: TimestepStrategy,
    pub trials: usize,
    /// Staged elimination plan; the naive classifier is used when absent.
    pub plan: Option<StagePlan>,
    pub loss: LossKind,
    pub objective: ObjectiveKind,
    pub guidance: GuidanceConfig,
    pub crop: usize,
    pub noise: NoiseVariant,
    pub prune: Option<PrunerConfig>,
    pub seed: u64,
    pub data_seed: u64,
    pub studies: StudyConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleConfig::default(),
            dataset: fixtures::separated_gmm(),
            samples_per_class: 100,
            train_samples_per_class: 250,
            denoiser: DenoiserSpec::Analytic,
            strategy: TimestepStrategy::UniformRandom,
            trials: 64,
            plan: None,
            loss: LossKind::SquaredL2,
            objective: ObjectiveKind::UniformL2,
            guidance: GuidanceConfig::default(),
            crop: 0,
            noise: NoiseVariant::StandardNormal,
            prune: None,
            seed: 0,
            data_seed: 0,
            studies: StudyConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn options(&self, trace: bool) -> ClassifierOptions {
        ClassifierOptions {
            loss: self.loss,
            objective: self.objective,
            guidance: self.guidance,
            crop: self.crop,
            noise: self.noise,
            trace,
        }
    }

    pub fn benchmark(&self, trace: bool) -> BenchmarkConfig {
        BenchmarkConfig {
            strategy: self.strategy.clone(),
            trials: self.trials,
            plan: self.plan.clone(),
            options: self.options(trace),
            prune: self.prune,
        }
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::from_config(&self.schedule)
    }

    /// Seeds of the training and test datasets.
    pub fn dataset_seeds(&self) -> (u64, u64) {
        (
            derive_seed(self.data_seed, streams::DATASET, 0),
            derive_seed(self.data_seed, streams::DATASET, 1),
        )
    }

    /// Cross-field checks. Every error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let sched = self.schedule()?;
        self.strategy.validate(sched.steps())?;
        self.guidance.validate()?;
        self.noise.validate()?;
        let is_gmm = matches!(self.dataset, DatasetSpec::Gmm(_));
        let classes = self.dataset.num_classes()?;
        if self.samples_per_class == 0 {
            return Err(Error::config("samples_per_class", "must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be positive"));
        }
        if matches!(self.denoiser, DenoiserSpec::Analytic) && !is_gmm {
            return Err(Error::config("denoiser", "the analytic denoiser needs a Gaussian-mixture dataset"));
        }
        if let DenoiserSpec::Mlp { train, .. } = &self.denoiser {
            train.validate()?;
            if self.train_samples_per_class == 0 {
                return Err(Error::config("train_samples_per_class", "must be positive"));
            }
            if let Some(cfg) = self.denoiser.mlp_config(1, classes) {
                cfg.validate()?;
            }
        }
        if self.objective.needs_variance() && !self.denoiser.supports_variance() {
            return Err(Error::config(
                "objective",
                format!("{:?} needs a denoiser that predicts variances", self.objective),
            ));
        }
        if self.crop > 0 && !self.dataset.is_spatial() {
            return Err(Error::config("crop", "cropping needs an image dataset"));
        }
        if self.guidance.is_active() && !self.denoiser.supports_unconditional() {
            return Err(Error::config("guidance", "guidance needs a denoiser with an unconditional mode"));
        }
        let mut candidates = classes;
        if let Some(p) = &self.prune {
            p.validate(classes)?;
            if !is_gmm {
                return Err(Error::config("prune", "the pruning oracle needs a Gaussian-mixture dataset"));
            }
            candidates = p.k;
        }
        if let Some(plan) = &self.plan {
            let report = validate_plan(plan, candidates);
            if !report.is_ok() {
                let reasons: Vec<String> = report.diagnostics.iter().map(ToString::to_string).collect();
                return Err(Error::config("plan", reasons.join("; ")));
            }
        }
        let s = &self.studies;
        for strategy in &s.scaling_strategies {
            strategy.validate(sched.steps()).map_err(|e| Error::config("studies.scaling_strategies", e.to_string()))?;
        }
        if s.scaling_budgets.is_empty() || s.scaling_budgets[0] == 0 || s.scaling_budgets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("studies.scaling_budgets", "need positive, strictly increasing budgets"));
        }
        if s.variance_sets < 2 || s.variance_set_size == 0 || s.variance_inputs == 0 {
            return Err(Error::config("studies.variance_sets", "need at least two non-empty sets and one input"));
        }
        if s.winoground_trials == 0 {
            return Err(Error::config("studies.winoground_trials", "must be positive"));
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a configuration document. Unknown keys and type
/// errors are reported with the path of the offending key.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "<root>".to_string() } else { path };
        Error::config(field, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}
