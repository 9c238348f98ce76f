//! Timestep sampling strategies, shared sample sets, stage plans and
//! candidate pruning.

use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{draw_noise, NoiseVariant};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimestepStrategy {
    /// `t ~ U{1, ..., T}` independently per point.
    #[default]
    UniformRandom,
    /// Round-robin over `count` bin-centred timesteps
    /// `round((j - 1/2) T / count)`, `j = 1..=count`. When a sample set has
    /// fewer points than `count`, the bins are coarsened to the set size.
    EvenlySpaced { count: usize },
    /// The same timestep for every point, each with fresh noise.
    FixedSingle { t: usize },
    /// `t ~ U{center - halfwidth, ..., center + halfwidth}`.
    Window { center: usize, halfwidth: usize },
    /// Round-robin over an explicit list.
    ExplicitList { timesteps: Vec<usize> },
}

impl TimestepStrategy {
    pub fn validate(&self, steps: usize) -> Result<()> {
        let in_range = |t: usize| (1..=steps).contains(&t);
        let bad = |what: String| Err(Error::config("strategy", what));
        match self {
            TimestepStrategy::UniformRandom => Ok(()),
            TimestepStrategy::EvenlySpaced { count } => {
                if *count == 0 || *count > steps {
                    bad(format!("evenly spaced count {count} must lie in [1, {steps}]"))
                } else {
                    Ok(())
                }
            }
            TimestepStrategy::FixedSingle { t } if !in_range(*t) => {
                bad(format!("timestep {t} outside [1, {steps}]"))
            }
            TimestepStrategy::FixedSingle { .. } => Ok(()),
            TimestepStrategy::Window { center, halfwidth } => {
                let (lo, hi) = (center.checked_sub(*halfwidth), center + halfwidth);
                match lo {
                    Some(lo) if in_range(lo) && in_range(hi) => Ok(()),
                    _ => bad(format!("window {center} +/- {halfwidth} leaves [1, {steps}]")),
                }
            }
            TimestepStrategy::ExplicitList { timesteps } => {
                if timesteps.is_empty() {
                    bad("explicit timestep list is empty".into())
                } else if let Some(t) = timesteps.iter().find(|t| !in_range(**t)) {
                    bad(format!("timestep {t} outside [1, {steps}]"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Short human-readable label used in reports.
    pub fn label(&self) -> String {
        match self {
            TimestepStrategy::UniformRandom => "uniform".into(),
            TimestepStrategy::EvenlySpaced { count } => format!("even({count})"),
            TimestepStrategy::FixedSingle { t } => format!("fixed({t})"),
            TimestepStrategy::Window { center, halfwidth } => format!("window({center},{halfwidth})"),
            TimestepStrategy::ExplicitList { timesteps } => format!(
                "list({})",
                timesteps.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
            ),
        }
    }

    /// Parses a comma-separated timestep list, e.g. `"100,500,900"`.
    pub fn parse_list(s: &str) -> Result<Self> {
        let timesteps = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::config("strategy.timesteps", format!("`{p}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TimestepStrategy::ExplicitList { timesteps })
    }
}

/// Bin-centred evenly spaced timesteps.
pub fn evenly_spaced(count: usize, steps: usize) -> Vec<usize> {
    (1..=count)
        .map(|j| {
            let t = ((j as f64 - 0.5) * steps as f64 / count as f64).round() as usize;
            t.clamp(1, steps)
        })
        .collect()
}

/// One `(t, eps)` evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub t: usize,
    pub eps: Vec<f64>,
}

impl EvalPoint {
    /// Hash of the timestep and the exact noise bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.t.hash(&mut h);
        for e in &self.eps {
            e.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// The fixed set of evaluation points shared by every candidate class.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<EvalPoint>,
    pub seed: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Incremental generator of evaluation points.
///
/// Draws `(t, eps)` point by point from a single stream, so a set of `n`
/// points is always a prefix of a longer set from the same generator.
#[derive(Debug, Clone)]
pub struct PointSampler {
    strategy: TimestepStrategy,
    noise: NoiseVariant,
    steps: usize,
    dim: usize,
    cycle: Vec<usize>,
    drawn: usize,
    rng: ChaCha8Rng,
}

impl PointSampler {
    /// `total` is the number of points the caller intends to draw; it only
    /// affects how evenly spaced bins are coarsened.
    pub fn new(
        strategy: &TimestepStrategy,
        noise: NoiseVariant,
        total: usize,
        steps: usize,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        strategy.validate(steps)?;
        noise.validate()?;
        let cycle = match strategy {
            TimestepStrategy::EvenlySpaced { count } => evenly_spaced((*count).min(total.max(1)), steps),
            TimestepStrategy::ExplicitList { timesteps } => timesteps.clone(),
            _ => Vec::new(),
        };
        Ok(Self {
            strategy: strategy.clone(),
            noise,
            steps,
            dim,
            cycle,
            drawn: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn next_point(&mut self) -> Result<EvalPoint> {
        let t = match &self.strategy {
            TimestepStrategy::UniformRandom => self.rng.random_range(1..=self.steps),
            TimestepStrategy::FixedSingle { t } => *t,
            TimestepStrategy::Window { center, halfwidth } => {
                self.rng.random_range(center - halfwidth..=center + halfwidth)
            }
            TimestepStrategy::EvenlySpaced { .. } | TimestepStrategy::ExplicitList { .. } => {
                self.cycle[self.drawn % self.cycle.len()]
            }
        };
        let eps = draw_noise(self.dim, &self.noise, &mut self.rng)?;
        self.drawn += 1;
        Ok(EvalPoint { t, eps })
    }

    pub fn take(&mut self, n: usize) -> Result<Vec<EvalPoint>> {
        (0..n).map(|_| self.next_point()).collect()
    }
}

/// Builds the shared sample set of `n_trials` points.
pub fn make_sample_set(
    strategy: &TimestepStrategy,
    noise: NoiseVariant,
    n_trials: usize,
    steps: usize,
    dim: usize,
    seed: u64,
) -> Result<SampleSet> {
    if n_trials == 0 {
        return Err(Error::config("n_trials", "need at least one trial"));
    }
    let points = PointSampler::new(strategy, noise, n_trials, steps, dim, seed)?.take(n_trials)?;
    Ok(SampleSet { points, seed })
}

/// Staged elimination schedule. `trials[i]` is the cumulative number of
/// trials each surviving class has after stage `i`; `keep[i]` the number of
/// classes kept after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StagePlan {
    pub keep: Vec<usize>,
    pub trials: Vec<usize>,
}

impl StagePlan {
    /// Single stage that keeps every class: equivalent to the naive classifier.
    pub fn full_keep(n_classes: usize, n_trials: usize) -> Self {
        Self {
            keep: vec![n_classes],
            trials: vec![n_trials],
        }
    }

    pub fn stages(&self) -> usize {
        self.keep.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PlanDiagnostic {
    Empty,
    LengthMismatch { keep: usize, trials: usize },
    ZeroEntry { index: usize },
    KeepNotDecreasing { index: usize },
    TrialsNotIncreasing { index: usize },
    LastKeepNotOne { last: usize },
    KeepExceedsClasses { keep: usize, classes: usize },
}

impl std::fmt::Display for PlanDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlanDiagnostic::Empty => write!(f, "plan has no stages"),
            PlanDiagnostic::LengthMismatch { keep, trials } => {
                write!(f, "keep list has {keep} entries but trial list has {trials}")
            }
            PlanDiagnostic::ZeroEntry { index } => write!(f, "stage {index} has a zero entry"),
            PlanDiagnostic::KeepNotDecreasing { index } => {
                write!(f, "keep list not strictly decreasing at stage {index}")
            }
            PlanDiagnostic::TrialsNotIncreasing { index } => {
                write!(f, "trial list not strictly increasing at stage {index}")
            }
            PlanDiagnostic::LastKeepNotOne { last } => {
                write!(f, "last keep entry is {last}; must be 1 unless the plan is a single full-keep stage")
            }
            PlanDiagnostic::KeepExceedsClasses { keep, classes } => {
                write!(f, "first keep entry {keep} exceeds the {classes} candidate classes")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanReport {
    pub diagnostics: Vec<PlanDiagnostic>,
    /// `sum_i keep[i-1] * (trials[i] - trials[i-1])` with `keep[-1] = n_classes`.
    pub evaluation_bound: usize,
}

impl PlanReport {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn into_result(self) -> Result<usize> {
        if self.is_ok() {
            Ok(self.evaluation_bound)
        } else {
            let msg = self.diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            Err(Error::config("plan", msg))
        }
    }
}

/// Checks a plan against the number of candidate classes. Never fails;
/// problems are reported as diagnostics.
///
/// A single stage keeping every class is accepted as the degenerate naive plan.
pub fn validate_plan(plan: &StagePlan, n_classes: usize) -> PlanReport {
    let mut diagnostics = Vec::new();
    if plan.keep.is_empty() || plan.trials.is_empty() {
        diagnostics.push(PlanDiagnostic::Empty);
    }
    if plan.keep.len() != plan.trials.len() {
        diagnostics.push(PlanDiagnostic::LengthMismatch {
            keep: plan.keep.len(),
            trials: plan.trials.len(),
        });
    }
    for (i, (&k, &n)) in plan.keep.iter().zip(&plan.trials).enumerate() {
        if k == 0 || n == 0 {
            diagnostics.push(PlanDiagnostic::ZeroEntry { index: i });
        }
    }
    for i in 1..plan.keep.len() {
        if plan.keep[i] >= plan.keep[i - 1] {
            diagnostics.push(PlanDiagnostic::KeepNotDecreasing { index: i });
        }
    }
    for i in 1..plan.trials.len() {
        if plan.trials[i] <= plan.trials[i - 1] {
            diagnostics.push(PlanDiagnostic::TrialsNotIncreasing { index: i });
        }
    }
    if let (Some(&last), Some(&first)) = (plan.keep.last(), plan.keep.first()) {
        let full_keep = plan.keep.len() == 1 && first == n_classes;
        if last != 1 && !full_keep {
            diagnostics.push(PlanDiagnostic::LastKeepNotOne { last });
        }
        if first > n_classes {
            diagnostics.push(PlanDiagnostic::KeepExceedsClasses {
                keep: first,
                classes: n_classes,
            });
        }
    }
    let mut bound = 0usize;
    let mut alive = n_classes;
    let mut prev = 0usize;
    for (&k, &n) in plan.keep.iter().zip(&plan.trials) {
        bound += alive * n.saturating_sub(prev);
        alive = alive.min(k);
        prev = n;
    }
    PlanReport {
        diagnostics,
        evaluation_bound: bound,
    }
}

/// Scores from an external weak classifier, used to restrict the candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub k: usize,
    pub scores: Vec<f64>,
}

/// Indices of the `k` highest scores, by descending score with ties toward
/// the lower index.
pub fn prune_candidates(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::config(
            "prune.k",
            format!("k = {k} must lie in [1, {}]", scores.len()),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evenly_spaced_bin_centres() {
        let s = make_sample_set(
            &TimestepStrategy::EvenlySpaced { count: 4 },
            NoiseVariant::StandardNormal,
            4,
            1000,
            2,
            0,
        )
        .unwrap();
        let ts: Vec<usize> = s.points.iter().map(|p| p.t).collect();
        assert_eq!(ts, vec![125, 375, 625, 875]);
        assert_eq!(evenly_spaced(1000, 1000), (1..=1000).collect::<Vec<_>>());
    }

    #[test]
    fn evenly_spaced_round_robin_counts() {
        let s = make_sample_set(
            &TimestepStrategy::EvenlySpaced { count: 5 },
            NoiseVariant::StandardNormal,
            15,
            100,
            1,
            3,
        )
        .unwrap();
        for t in evenly_spaced(5, 100) {
            assert_eq!(s.points.iter().filter(|p| p.t == t).count(), 3);
        }
    }

    #[test]
    fn evenly_spaced_coarsens_to_small_sets() {
        let s = make_sample_set(
            &TimestepStrategy::EvenlySpaced { count: 100 },
            NoiseVariant::StandardNormal,
            2,
            1000,
            1,
            0,
        )
        .unwrap();
        assert_eq!(s.points.iter().map(|p| p.t).collect::<Vec<_>>(), vec![250, 750]);
    }

    #[test]
    fn fixed_single_fresh_noise() {
        let s = make_sample_set(
            &TimestepStrategy::FixedSingle { t: 500 },
            NoiseVariant::StandardNormal,
            3,
            1000,
            4,
            11,
        )
        .unwrap();
        assert!(s.points.iter().all(|p| p.t == 500));
        assert_ne!(s.points[0].eps, s.points[1].eps);
        assert_ne!(s.points[1].eps, s.points[2].eps);
    }

    #[test]
    fn sample_sets_reproducible_and_prefix_consistent() {
        let strat = TimestepStrategy::Window { center: 500, halfwidth: 25 };
        let a = make_sample_set(&strat, NoiseVariant::StandardNormal, 10, 1000, 3, 42).unwrap();
        let b = make_sample_set(&strat, NoiseVariant::StandardNormal, 10, 1000, 3, 42).unwrap();
        assert_eq!(a, b);
        let long = make_sample_set(&strat, NoiseVariant::StandardNormal, 20, 1000, 3, 42).unwrap();
        assert_eq!(a.points[..], long.points[..10]);
        assert!(a.points.iter().all(|p| (475..=525).contains(&p.t)));
    }

    #[test]
    fn strategies_reject_out_of_range_timesteps() {
        let bad = [
            TimestepStrategy::FixedSingle { t: 0 },
            TimestepStrategy::FixedSingle { t: 1001 },
            TimestepStrategy::Window { center: 10, halfwidth: 20 },
            TimestepStrategy::ExplicitList { timesteps: vec![5, 2000] },
            TimestepStrategy::EvenlySpaced { count: 0 },
        ];
        for s in bad {
            assert!(make_sample_set(&s, NoiseVariant::StandardNormal, 4, 1000, 1, 0).is_err(), "{s:?}");
        }
        assert!(make_sample_set(&TimestepStrategy::UniformRandom, NoiseVariant::StandardNormal, 0, 1000, 1, 0).is_err());
    }

    #[test]
    fn explicit_list_parsing() {
        let s = TimestepStrategy::parse_list("100, 500,900").unwrap();
        assert_eq!(s, TimestepStrategy::ExplicitList { timesteps: vec![100, 500, 900] });
        assert!(TimestepStrategy::parse_list("1,x").is_err());
    }

    #[test]
    fn plan_validation() {
        let pets = StagePlan { keep: vec![5, 1], trials: vec![25, 250] };
        let report = validate_plan(&pets, 37);
        assert!(report.is_ok());
        assert_eq!(report.evaluation_bound, 37 * 25 + 5 * 225);
        assert_eq!(report.evaluation_bound, 2050);

        let r = validate_plan(&StagePlan { keep: vec![1, 5], trials: vec![25, 250] }, 37);
        assert!(r.diagnostics.contains(&PlanDiagnostic::KeepNotDecreasing { index: 1 }));
        let r = validate_plan(&StagePlan { keep: vec![5, 1], trials: vec![250, 25] }, 37);
        assert!(r.diagnostics.contains(&PlanDiagnostic::TrialsNotIncreasing { index: 1 }));
        let r = validate_plan(&StagePlan { keep: vec![5, 2], trials: vec![25, 250] }, 37);
        assert!(r.diagnostics.contains(&PlanDiagnostic::LastKeepNotOne { last: 2 }));
        let r = validate_plan(&StagePlan { keep: vec![5, 1], trials: vec![25, 250] }, 4);
        assert!(r.diagnostics.contains(&PlanDiagnostic::KeepExceedsClasses { keep: 5, classes: 4 }));
        let r = validate_plan(&StagePlan { keep: vec![5], trials: vec![25, 250] }, 37);
        assert!(!r.is_ok());

        let full = validate_plan(&StagePlan::full_keep(7, 30), 7);
        assert!(full.is_ok());
        assert_eq!(full.evaluation_bound, 210);
    }

    #[test]
    fn pruning_examples() {
        assert_eq!(prune_candidates(&[0.1, 0.9, 0.5], 2).unwrap(), vec![1, 2]);
        assert_eq!(prune_candidates(&[0.1, 0.9, 0.5], 3).unwrap(), vec![1, 2, 0]);
        assert_eq!(prune_candidates(&[0.3; 4], 1).unwrap(), vec![0]);
        assert!(prune_candidates(&[0.3; 4], 5).is_err());
        assert!(prune_candidates(&[0.3; 4], 0).is_err());
    }
}
