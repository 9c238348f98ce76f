//! Diffusion classification: shared-sample error estimation, posteriors, and
//! the naive and adaptive (staged elimination) classifiers.

mod scoring;

pub use scoring::{
    apply_guidance, eps_error, vlb_error, vlb_weight, GuidanceConfig, LossKind, ObjectiveKind,
};

use serde::{Deserialize, Serialize};

use crate::data::DataPoint;
use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::noise::NoiseVariant;
use crate::schedule::{forward_noise, NoiseSchedule};
use crate::strategy::{make_sample_set, validate_plan, EvalPoint, PointSampler, StagePlan, TimestepStrategy};

/// How each per-point error is computed, plus how noise is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierOptions {
    pub loss: LossKind,
    pub objective: ObjectiveKind,
    pub guidance: GuidanceConfig,
    /// Pixels removed from each spatial edge before measuring the error.
    pub crop: usize,
    pub noise: NoiseVariant,
    /// Record one [`TraceRecord`] per class and evaluation point.
    pub trace: bool,
}

impl ClassifierOptions {
    pub fn check_denoiser(&self, denoiser: &dyn Denoiser) -> Result<()> {
        self.guidance.validate()?;
        self.noise.validate()?;
        if self.objective.needs_variance() && !denoiser.supports_variance() {
            return Err(Error::config(
                "objective",
                "variational-bound objectives need a denoiser that predicts variances",
            ));
        }
        if self.guidance.is_active() && !denoiser.supports_unconditional() {
            return Err(Error::config(
                "guidance",
                "guidance needs a denoiser with unconditional prediction",
            ));
        }
        Ok(())
    }
}

/// One evaluated `(class, point)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub class: usize,
    /// Index of the evaluation point within this input's point stream.
    pub trial: usize,
    pub t: usize,
    pub error: f64,
    pub stage: usize,
    /// Fingerprint of the `(t, eps)` point; equal across classes by construction.
    pub point_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationResult {
    /// Candidate class ids; every per-class vector below is aligned with it.
    pub classes: Vec<usize>,
    pub mean_errors: Vec<f64>,
    pub trial_counts: Vec<usize>,
    /// Softmax of negative mean errors over the surviving classes; eliminated
    /// classes get probability zero.
    pub posterior: Vec<f64>,
    pub predicted: usize,
    /// Stage after which each class was eliminated, `None` for survivors.
    pub eliminated_at_stage: Vec<Option<usize>>,
    /// Total number of conditional noise predictions.
    pub evaluations: usize,
    pub trace: Vec<TraceRecord>,
}

/// `p_i = exp(-e_i) / sum_j exp(-e_j)`, computed with max subtraction.
pub fn posterior_from_errors(errors: &[f64]) -> Vec<f64> {
    if errors.is_empty() {
        return Vec::new();
    }
    let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = errors.iter().map(|e| (min - e).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Position of the lowest value among `alive`, ties toward the lower class id.
fn argmin_position(values: &[f64], classes: &[usize], alive: &[usize]) -> usize {
    *alive
        .iter()
        .min_by(|&&a, &&b| values[a].total_cmp(&values[b]).then(classes[a].cmp(&classes[b])))
        .expect("at least one surviving class")
}

fn check_inputs(x: &DataPoint, classes: &[usize], denoiser: &dyn Denoiser) -> Result<()> {
    if classes.is_empty() {
        return Err(Error::config("classes", "need at least one candidate class"));
    }
    if x.dim() != denoiser.dim() {
        return Err(Error::ShapeMismatch {
            expected: vec![denoiser.dim()],
            actual: x.shape.clone(),
        });
    }
    if let Some(&c) = classes.iter().find(|&&c| c >= denoiser.num_classes()) {
        return Err(Error::ClassOutOfRange {
            class: c,
            num_classes: denoiser.num_classes(),
        });
    }
    x.check_finite()
}

/// Errors of every class at every point, `errors[class_position][point]`.
///
/// Each point is noised once and the same `x_t` is scored under every class.
pub fn point_errors(
    x: &DataPoint,
    classes: &[usize],
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    points: &[EvalPoint],
    opts: &ClassifierOptions,
) -> Result<Vec<Vec<f64>>> {
    check_inputs(x, classes, denoiser)?;
    opts.check_denoiser(denoiser)?;
    let mut errors = vec![Vec::with_capacity(points.len()); classes.len()];
    for point in points {
        let x_t = forward_noise(&x.values, point.t, &point.eps, sched)?;
        let uncond = if opts.guidance.is_active() {
            Some(denoiser.predict_eps(&x_t, point.t, None, sched)?)
        } else {
            None
        };
        for (row, &c) in errors.iter_mut().zip(classes) {
            let cond = denoiser.predict_eps(&x_t, point.t, Some(c), sched)?;
            let eps_hat = match &uncond {
                Some(u) => apply_guidance(&cond, u, opts.guidance.w)?,
                None => cond,
            };
            let uniform = || eps_error(&point.eps, &eps_hat, &x.shape, opts.loss, opts.crop);
            let vlb = || -> Result<f64> {
                let var = denoiser.predict_variance(&x_t, point.t, Some(c), sched)?;
                vlb_error(&point.eps, &eps_hat, &var, point.t, sched, &x.shape, opts.crop)
            };
            let e = match opts.objective {
                ObjectiveKind::UniformL2 => uniform()?,
                ObjectiveKind::Vlb => vlb()?,
                ObjectiveKind::Sum => uniform()? + vlb()?,
            };
            if !e.is_finite() {
                return Err(Error::Numeric(format!("non-finite error for class {c} at t = {}", point.t)));
            }
            row.push(e);
        }
    }
    Ok(errors)
}

/// Mean error of each candidate class over the shared points.
pub fn estimate_errors(
    x: &DataPoint,
    classes: &[usize],
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    points: &[EvalPoint],
    opts: &ClassifierOptions,
) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::config("sample_set", "need at least one evaluation point"));
    }
    Ok(point_errors(x, classes, denoiser, sched, points, opts)?
        .iter()
        .map(|e| mean(e))
        .collect())
}

fn trace_records(
    classes: &[usize],
    rows: &[usize],
    errors: &[Vec<f64>],
    points: &[EvalPoint],
    first_trial: usize,
    stage: usize,
) -> Vec<TraceRecord> {
    let hashes: Vec<u64> = points.iter().map(EvalPoint::fingerprint).collect();
    let mut out = Vec::with_capacity(rows.len() * points.len());
    for (j, p) in points.iter().enumerate() {
        for (&row, errs) in rows.iter().zip(errors) {
            out.push(TraceRecord {
                class: classes[row],
                trial: first_trial + j,
                t: p.t,
                error: errs[j],
                stage,
                point_hash: hashes[j],
            });
        }
    }
    out
}

/// Scores every candidate on one shared sample set and returns the argmin.
#[allow(clippy::too_many_arguments)]
pub fn classify_naive(
    x: &DataPoint,
    classes: &[usize],
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    strategy: &TimestepStrategy,
    n_trials: usize,
    opts: &ClassifierOptions,
    seed: u64,
) -> Result<ClassificationResult> {
    let set = make_sample_set(strategy, opts.noise, n_trials, sched.steps(), x.dim(), seed)?;
    let errors = point_errors(x, classes, denoiser, sched, &set.points, opts)?;
    let mean_errors: Vec<f64> = errors.iter().map(|e| mean(e)).collect();
    let all: Vec<usize> = (0..classes.len()).collect();
    let best = argmin_position(&mean_errors, classes, &all);
    let trace = if opts.trace {
        trace_records(classes, &all, &errors, &set.points, 0, 0)
    } else {
        Vec::new()
    };
    Ok(ClassificationResult {
        posterior: posterior_from_errors(&mean_errors),
        predicted: classes[best],
        trial_counts: vec![n_trials; classes.len()],
        eliminated_at_stage: vec![None; classes.len()],
        evaluations: n_trials * classes.len(),
        classes: classes.to_vec(),
        mean_errors,
        trace,
    })
}

/// Staged elimination: each stage scores the surviving classes on freshly
/// drawn shared points until they reach the stage's cumulative trial count,
/// then keeps the classes with the lowest running mean error.
#[allow(clippy::too_many_arguments)]
pub fn classify_adaptive(
    x: &DataPoint,
    classes: &[usize],
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    plan: &StagePlan,
    strategy: &TimestepStrategy,
    opts: &ClassifierOptions,
    seed: u64,
) -> Result<ClassificationResult> {
    validate_plan(plan, classes.len()).into_result()?;
    check_inputs(x, classes, denoiser)?;
    let total = *plan.trials.last().expect("validated plan");
    let mut sampler = PointSampler::new(strategy, opts.noise, total, sched.steps(), x.dim(), seed)?;

    let n = classes.len();
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut eliminated = vec![None; n];
    let mut alive: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let mut prev = 0;

    for (stage, (&keep, &trials)) in plan.keep.iter().zip(&plan.trials).enumerate() {
        let points = sampler.take(trials - prev)?;
        let subset: Vec<usize> = alive.iter().map(|&i| classes[i]).collect();
        let stage_errors = point_errors(x, &subset, denoiser, sched, &points, opts)?;
        if opts.trace {
            trace.extend(trace_records(classes, &alive, &stage_errors, &points, prev, stage));
        }
        for (&i, errs) in alive.iter().zip(stage_errors) {
            errors[i].extend(errs);
        }
        prev = trials;

        if keep < alive.len() {
            let means: Vec<f64> = errors.iter().map(|e| if e.is_empty() { f64::INFINITY } else { mean(e) }).collect();
            let mut ranked = alive.clone();
            ranked.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(classes[a].cmp(&classes[b])));
            for &i in &ranked[keep..] {
                eliminated[i] = Some(stage);
            }
            ranked.truncate(keep);
            ranked.sort_unstable();
            alive = ranked;
        }
    }

    let mean_errors: Vec<f64> = errors.iter().map(|e| mean(e)).collect();
    let best = argmin_position(&mean_errors, classes, &alive);
    let survivor_post = posterior_from_errors(&alive.iter().map(|&i| mean_errors[i]).collect::<Vec<_>>());
    let mut posterior = vec![0.0; n];
    for (&i, p) in alive.iter().zip(survivor_post) {
        posterior[i] = p;
    }
    let trial_counts: Vec<usize> = errors.iter().map(Vec::len).collect();
    Ok(ClassificationResult {
        classes: classes.to_vec(),
        predicted: classes[best],
        evaluations: trial_counts.iter().sum(),
        trial_counts,
        posterior,
        eliminated_at_stage: eliminated,
        mean_errors,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::GaussianClassModel;

    fn symmetric_model() -> GaussianClassModel {
        GaussianClassModel::isotropic(vec![vec![3.0, 0.0], vec![-3.0, 0.0]], 1.0).unwrap()
    }

    #[test]
    fn posterior_examples() {
        assert_eq!(posterior_from_errors(&[1.0, 1.0]), vec![0.5, 0.5]);
        let p = posterior_from_errors(&[0.0, 2f64.ln()]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let e = [0.3, 1.7, -2.0, 0.0];
        let shifted: Vec<f64> = e.iter().map(|v| v + 17.3).collect();
        for (a, b) in posterior_from_errors(&e).iter().zip(posterior_from_errors(&shifted)) {
            assert!((a - b).abs() < 1e-12);
        }
        // huge errors do not underflow to NaN
        let p = posterior_from_errors(&[1e6, 1e6 + 1.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_classes_have_identical_errors() {
        let model = GaussianClassModel::isotropic(vec![vec![1.0, 2.0], vec![1.0, 2.0]], 0.5).unwrap();
        let sched = NoiseSchedule::linear(100).unwrap();
        let x = DataPoint::vector(vec![0.4, 1.1]);
        let r = classify_naive(
            &x,
            &[0, 1],
            &model,
            &sched,
            &TimestepStrategy::UniformRandom,
            32,
            &ClassifierOptions::default(),
            1,
        )
        .unwrap();
        assert_eq!(r.mean_errors[0].to_bits(), r.mean_errors[1].to_bits());
        assert_eq!(r.predicted, 0);
    }

    #[test]
    fn single_class_is_certain() {
        let model = GaussianClassModel::isotropic(vec![vec![0.0, 0.0]], 1.0).unwrap();
        let sched = NoiseSchedule::linear(50).unwrap();
        let r = classify_naive(
            &DataPoint::vector(vec![1.0, -1.0]),
            &[0],
            &model,
            &sched,
            &TimestepStrategy::UniformRandom,
            4,
            &ClassifierOptions::default(),
            0,
        )
        .unwrap();
        assert_eq!(r.predicted, 0);
        assert_eq!(r.posterior, vec![1.0]);
    }

    #[test]
    fn guidance_zero_matches_disabled() {
        let model = symmetric_model();
        let sched = NoiseSchedule::linear(100).unwrap();
        let x = DataPoint::vector(vec![0.5, 0.2]);
        let strat = TimestepStrategy::UniformRandom;
        let plain = ClassifierOptions::default();
        let zero = ClassifierOptions {
            guidance: GuidanceConfig::weight(0.0),
            ..plain
        };
        let a = classify_naive(&x, &[0, 1], &model, &sched, &strat, 16, &plain, 3).unwrap();
        let b = classify_naive(&x, &[0, 1], &model, &sched, &strat, 16, &zero, 3).unwrap();
        assert_eq!(a, b);
        let strong = ClassifierOptions {
            guidance: GuidanceConfig::weight(2.0),
            ..plain
        };
        let c = classify_naive(&x, &[0, 1], &model, &sched, &strat, 16, &strong, 3).unwrap();
        assert_ne!(a.mean_errors, c.mean_errors);
    }

    #[test]
    fn sum_objective_is_additive() {
        let model = symmetric_model();
        let sched = NoiseSchedule::linear(100).unwrap();
        let x = DataPoint::vector(vec![2.0, 0.5]);
        let set = make_sample_set(&TimestepStrategy::UniformRandom, NoiseVariant::StandardNormal, 10, 100, 2, 4).unwrap();
        let run = |objective| {
            let opts = ClassifierOptions {
                objective,
                ..ClassifierOptions::default()
            };
            point_errors(&x, &[0, 1], &model, &sched, &set.points, &opts).unwrap()
        };
        let (u, v, s) = (run(ObjectiveKind::UniformL2), run(ObjectiveKind::Vlb), run(ObjectiveKind::Sum));
        for c in 0..2 {
            for j in 0..10 {
                assert_eq!(s[c][j], u[c][j] + v[c][j]);
            }
        }
    }

    #[test]
    fn empty_inputs_are_errors() {
        let model = symmetric_model();
        let sched = NoiseSchedule::linear(100).unwrap();
        let x = DataPoint::vector(vec![2.0, 0.5]);
        let opts = ClassifierOptions::default();
        assert!(estimate_errors(&x, &[0, 1], &model, &sched, &[], &opts).is_err());
        assert!(estimate_errors(&x, &[], &model, &sched, &[EvalPoint { t: 3, eps: vec![0.0; 2] }], &opts).is_err());
        let wrong = DataPoint::vector(vec![2.0]);
        assert!(estimate_errors(&wrong, &[0], &model, &sched, &[EvalPoint { t: 3, eps: vec![0.0] }], &opts).is_err());
        assert!(matches!(
            estimate_errors(&x, &[2], &model, &sched, &[EvalPoint { t: 3, eps: vec![0.0; 2] }], &opts),
            Err(Error::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn adaptive_bookkeeping() {
        let means: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64 * 0.5, 0.0]).collect();
        let model = GaussianClassModel::isotropic(means, 0.5).unwrap();
        let sched = NoiseSchedule::linear(100).unwrap();
        let x = DataPoint::vector(vec![0.1, 0.0]);
        let plan = StagePlan { keep: vec![3, 1], trials: vec![4, 10] };
        let opts = ClassifierOptions { trace: true, ..Default::default() };
        let classes: Vec<usize> = (0..6).collect();
        let r = classify_adaptive(&x, &classes, &model, &sched, &plan, &TimestepStrategy::UniformRandom, &opts, 5).unwrap();
        assert_eq!(r.evaluations, 6 * 4 + 3 * 6);
        assert_eq!(r.trial_counts.iter().filter(|&&n| n == 10).count(), 3);
        assert_eq!(r.eliminated_at_stage.iter().filter(|s| **s == Some(0)).count(), 3);
        assert_eq!(r.eliminated_at_stage.iter().filter(|s| **s == Some(1)).count(), 2);
        assert_eq!(r.posterior.iter().filter(|p| **p > 0.0).count(), 1);
        assert_eq!(r.trace.len(), r.evaluations);
        let winner = r.classes.iter().position(|&c| c == r.predicted).unwrap();
        assert_eq!(r.eliminated_at_stage[winner], None);
        for rec in &r.trace {
            let pos = r.classes.iter().position(|&c| c == rec.class).unwrap();
            if let Some(s) = r.eliminated_at_stage[pos] {
                assert!(rec.stage <= s);
            }
        }
        let invalid = StagePlan { keep: vec![1, 3], trials: vec![4, 10] };
        assert!(classify_adaptive(&x, &classes, &model, &sched, &invalid, &TimestepStrategy::UniformRandom, &opts, 5).is_err());
    }
}
