//! Benchmark runs and the scaling, per-timestep and variance studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::datasets::SyntheticDataset;
use super::report::{ExperimentReport, MetricRow, RunMetadata};
use crate::classifier::{classify_adaptive, classify_naive, point_errors, ClassificationResult, ClassifierOptions};
use crate::data::DataPoint;
use crate::denoiser::{Denoiser, GaussianClassModel};
use crate::error::{Error, Result};
use crate::oracle::{bayes_posterior_gmm, uniform_prior};
use crate::schedule::NoiseSchedule;
use crate::seed::{derive_seed, streams};
use crate::strategy::{make_sample_set, prune_candidates, StagePlan, TimestepStrategy};

pub const DEFAULT_LABEL_NOISE: f64 = 0.2;

/// Weak-classifier stand-in: the Bayes posterior of the generating model,
/// except that with probability `label_noise` a uniformly drawn class is
/// promoted to the top score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrunerConfig {
    pub k: usize,
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
}

fn default_label_noise() -> f64 {
    DEFAULT_LABEL_NOISE
}

impl PrunerConfig {
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.k == 0 || self.k > n_classes {
            return Err(Error::config("prune.k", format!("k = {} must lie in [1, {n_classes}]", self.k)));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::config("prune.label_noise", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Pruning scores for one input under the noisy Bayes oracle.
pub fn noisy_oracle_scores<R: Rng + ?Sized>(
    model: &GaussianClassModel,
    x: &[f64],
    label_noise: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = model.classes().len();
    let mut scores = bayes_posterior_gmm(model, x, &uniform_prior(n))?.log_densities;
    let flip: f64 = rng.random();
    let pick = rng.random_range(0..n);
    if flip < label_noise {
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        scores[pick] = max + 1.0;
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default)]
    pub strategy: TimestepStrategy,
    /// Trials per class for the naive classifier; ignored when `plan` is set.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub plan: Option<StagePlan>,
    #[serde(default)]
    pub options: ClassifierOptions,
    #[serde(default)]
    pub prune: Option<PrunerConfig>,
}

fn default_trials() -> usize {
    64
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            strategy: TimestepStrategy::UniformRandom,
            trials: default_trials(),
            plan: None,
            options: ClassifierOptions::default(),
            prune: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn naive(strategy: TimestepStrategy, trials: usize) -> Self {
        Self {
            strategy,
            trials,
            ..Self::default()
        }
    }

    /// Budget label used in reports: the trial count, or the last cumulative
    /// trial count of the plan.
    pub fn budget(&self) -> usize {
        self.plan
            .as_ref()
            .and_then(|p| p.trials.last().copied())
            .unwrap_or(self.trials)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkOutcome {
    pub accuracy: f64,
    pub mean_per_class_accuracy: f64,
    /// Conditional noise predictions summed over all inputs.
    pub evaluations: usize,
    pub predictions: Vec<usize>,
    pub labels: Vec<usize>,
    pub results: Vec<ClassificationResult>,
}

impl BenchmarkOutcome {
    pub fn row(&self, strategy: String, trials: usize) -> MetricRow {
        MetricRow {
            strategy,
            trials,
            accuracy: self.accuracy,
            mean_per_class_accuracy: self.mean_per_class_accuracy,
            evaluations: self.evaluations,
            wall_time: None,
        }
    }
}

/// `(average accuracy, mean per-class accuracy)`.
pub fn accuracies(predictions: &[usize], labels: &[usize], num_classes: usize) -> (f64, f64) {
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    let mut hits = vec![0usize; num_classes];
    let mut totals = vec![0usize; num_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        totals[l] += 1;
        hits[l] += usize::from(p == l);
    }
    let present: Vec<f64> = hits
        .iter()
        .zip(&totals)
        .filter(|(_, &t)| t > 0)
        .map(|(&h, &t)| h as f64 / t as f64)
        .collect();
    (
        correct as f64 / predictions.len() as f64,
        present.iter().sum::<f64>() / present.len() as f64,
    )
}

fn check_dataset(dataset: &SyntheticDataset, denoiser: &dyn Denoiser) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::config("dataset", "need at least one sample"));
    }
    if dataset.num_classes > denoiser.num_classes() {
        return Err(Error::ClassOutOfRange {
            class: dataset.num_classes - 1,
            num_classes: denoiser.num_classes(),
        });
    }
    Ok(())
}

/// Classifies every sample, in parallel over samples.
///
/// Sample `i` uses classifier seed `derive_seed(seed, CLASSIFY, i)` and
/// pruning seed `derive_seed(seed, PRUNE, i)`, so the outcome does not depend
/// on scheduling. Pruned candidates are passed in ascending class order.
pub fn run_benchmark(
    dataset: &SyntheticDataset,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    config: &BenchmarkConfig,
    seed: u64,
) -> Result<BenchmarkOutcome> {
    check_dataset(dataset, denoiser)?;
    let k = dataset.num_classes;
    if let Some(p) = &config.prune {
        p.validate(k)?;
        if dataset.model.is_none() {
            return Err(Error::Unsupported("pruning needs a dataset with a generating model".into()));
        }
    }
    let all: Vec<usize> = (0..k).collect();
    let results = dataset
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let classes = match (&config.prune, &dataset.model) {
                (Some(p), Some(model)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::PRUNE, i as u64));
                    let scores = noisy_oracle_scores(model, &x.values, p.label_noise, &mut rng)?;
                    let mut c = prune_candidates(&scores, p.k)?;
                    c.sort_unstable();
                    c
                }
                _ => all.clone(),
            };
            let s = derive_seed(seed, streams::CLASSIFY, i as u64);
            match &config.plan {
                Some(plan) => classify_adaptive(x, &classes, denoiser, sched, plan, &config.strategy, &config.options, s),
                None => classify_naive(x, &classes, denoiser, sched, &config.strategy, config.trials, &config.options, s),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let predictions: Vec<usize> = results.iter().map(|r| r.predicted).collect();
    let labels = dataset.labels();
    let (accuracy, mean_per_class_accuracy) = accuracies(&predictions, &labels, k);
    Ok(BenchmarkOutcome {
        accuracy,
        mean_per_class_accuracy,
        evaluations: results.iter().map(|r| r.evaluations).sum(),
        predictions,
        labels,
        results,
    })
}

/// Naive-classifier accuracy for each strategy at each budget.
///
/// Every budget reuses the same per-sample seeds, so for stream-based
/// strategies a smaller budget sees a prefix of a larger budget's points.
pub fn scaling_curve(
    dataset: &SyntheticDataset,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    strategies: &[TimestepStrategy],
    budgets: &[usize],
    options: &ClassifierOptions,
    seed: u64,
) -> Result<ExperimentReport> {
    if strategies.is_empty() {
        return Err(Error::config("strategies", "need at least one strategy"));
    }
    if budgets.is_empty() || budgets[0] == 0 || budgets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("budgets", "need positive, strictly increasing trial budgets"));
    }
    let metadata = RunMetadata::for_config(&(strategies, budgets, options), seed)?;
    let mut report = ExperimentReport::new(metadata);
    for strategy in strategies {
        for &trials in budgets {
            let config = BenchmarkConfig {
                strategy: strategy.clone(),
                trials,
                options: *options,
                ..BenchmarkConfig::default()
            };
            let outcome = run_benchmark(dataset, denoiser, sched, &config, seed)?;
            report.rows.push(outcome.row(strategy.label(), trials));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimestepAccuracy {
    pub t: usize,
    pub accuracy: f64,
}

/// `count` bin-centred timesteps, the usual grid for
/// [`timestep_accuracy_curve`], plus both endpoints.
pub fn timestep_grid(count: usize, steps: usize) -> Vec<usize> {
    let mut grid = vec![1];
    grid.extend(crate::strategy::evenly_spaced(count, steps));
    grid.push(steps);
    grid.dedup();
    grid
}

/// Accuracy of the one-trial classifier that only ever evaluates `t`.
pub fn timestep_accuracy_curve(
    dataset: &SyntheticDataset,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    grid: &[usize],
    options: &ClassifierOptions,
    seed: u64,
) -> Result<Vec<TimestepAccuracy>> {
    if grid.is_empty() {
        return Err(Error::config("grid", "need at least one timestep"));
    }
    grid.iter()
        .map(|&t| {
            let config = BenchmarkConfig {
                strategy: TimestepStrategy::FixedSingle { t },
                trials: 1,
                options: *options,
                ..BenchmarkConfig::default()
            };
            let outcome = run_benchmark(dataset, denoiser, sched, &config, seed)?;
            Ok(TimestepAccuracy {
                t,
                accuracy: outcome.accuracy,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// Variance of the mean-error difference when both classes share a set.
    pub paired_variance: f64,
    /// Variance when each class gets its own independently drawn set.
    pub unpaired_variance: f64,
    pub n_sets: usize,
    pub set_size: usize,
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

/// Variance of the difference in mean error between `classes[0]` and each
/// other candidate, across `n_sets` sample sets of `set_size` points,
/// averaged over the other candidates.
#[allow(clippy::too_many_arguments)]
pub fn variance_report(
    x: &DataPoint,
    classes: &[usize],
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    n_sets: usize,
    set_size: usize,
    strategy: &TimestepStrategy,
    options: &ClassifierOptions,
    seed: u64,
) -> Result<VarianceReport> {
    if classes.len() < 2 {
        return Err(Error::config("classes", "need at least two classes to compare"));
    }
    if n_sets < 2 {
        return Err(Error::config("n_sets", "need at least two sample sets"));
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let diffs = (0..n_sets)
        .into_par_iter()
        .map(|k| {
            let a = derive_seed(seed, streams::VARIANCE, 2 * k as u64);
            let b = derive_seed(seed, streams::VARIANCE, 2 * k as u64 + 1);
            let set_a = make_sample_set(strategy, options.noise, set_size, sched.steps(), x.dim(), a)?;
            let set_b = make_sample_set(strategy, options.noise, set_size, sched.steps(), x.dim(), b)?;
            let ea = point_errors(x, classes, denoiser, sched, &set_a.points, options)?;
            let eb = point_errors(x, &classes[1..], denoiser, sched, &set_b.points, options)?;
            let base = mean(&ea[0]);
            let paired: Vec<f64> = ea[1..].iter().map(|e| base - mean(e)).collect();
            let unpaired: Vec<f64> = eb.iter().map(|e| base - mean(e)).collect();
            Ok((paired, unpaired))
        })
        .collect::<Result<Vec<_>>>()?;
    let others = classes.len() - 1;
    let mut paired_variance = 0.0;
    let mut unpaired_variance = 0.0;
    for j in 0..others {
        let p: Vec<f64> = diffs.iter().map(|d| d.0[j]).collect();
        let u: Vec<f64> = diffs.iter().map(|d| d.1[j]).collect();
        paired_variance += sample_variance(&p) / others as f64;
        unpaired_variance += sample_variance(&u) / others as f64;
    }
    Ok(VarianceReport {
        paired_variance,
        unpaired_variance,
        n_sets,
        set_size,
    })
}
