//! Ground truth for Gaussian-mixture fixtures: exact Bayes posteriors,
//! closed-form expected noise-prediction errors, and dense per-timestep
//! error curves.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classifier::{eps_error, LossKind};
use crate::data::DataPoint;
use crate::denoiser::{Denoiser, GaussianClassModel};
use crate::error::{Error, Result};
use crate::noise::standard_normal;
use crate::schedule::{forward_noise, NoiseSchedule};
use crate::seed::{derive_seed, streams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesReport {
    pub log_densities: Vec<f64>,
    pub posterior: Vec<f64>,
    pub bayes_label: usize,
}

pub fn uniform_prior(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn check_prior(model: &GaussianClassModel, prior: &[f64]) -> Result<()> {
    let n = model.classes().len();
    let total: f64 = prior.iter().sum();
    if prior.len() != n || prior.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::config("prior", format!("need a probability vector over {n} classes")));
    }
    Ok(())
}

/// Exact posterior `p(c | x)` from the class-conditional densities.
pub fn bayes_posterior_gmm(model: &GaussianClassModel, x: &[f64], prior: &[f64]) -> Result<BayesReport> {
    check_prior(model, prior)?;
    let log_densities = (0..model.classes().len())
        .map(|c| model.log_density(x, c))
        .collect::<Result<Vec<_>>>()?;
    let joint: Vec<f64> = log_densities.iter().zip(prior).map(|(l, p)| l + p.ln()).collect();
    let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = joint.iter().map(|j| (j - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let posterior: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let bayes_label = posterior
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("non-empty model");
    Ok(BayesReport {
        log_densities,
        posterior,
        bayes_label,
    })
}

/// Monte Carlo settings used for mixture classes, which have no closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Quadrature {
    pub samples: usize,
    pub seed: u64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            samples: 20_000,
            seed: 0,
        }
    }
}

/// `E_eps` of the mean squared noise-prediction error of the analytic
/// denoiser at fixed `(x, t)`.
///
/// For a single Gaussian with `A = sqrt(1 - ab) (ab Sigma + (1 - ab) I)^-1`
/// this is `(||A sqrt(ab) (x - mu)||^2 + ||I - sqrt(1 - ab) A||_F^2) / d`.
/// Mixture classes fall back to Monte Carlo with the default [`Quadrature`].
pub fn analytic_expected_error(
    model: &GaussianClassModel,
    class: usize,
    x: &[f64],
    t: usize,
    sched: &NoiseSchedule,
    loss: LossKind,
) -> Result<f64> {
    analytic_expected_error_with(model, class, x, t, sched, loss, &Quadrature::default())
}

pub fn analytic_expected_error_with(
    model: &GaussianClassModel,
    class: usize,
    x: &[f64],
    t: usize,
    sched: &NoiseSchedule,
    loss: LossKind,
    quadrature: &Quadrature,
) -> Result<f64> {
    if loss != LossKind::SquaredL2 {
        return Err(Error::Unsupported(format!(
            "expected error has a closed form only for squared l2, not {loss:?}"
        )));
    }
    sched.check_timestep(t)?;
    if x.len() != model.dim() {
        return Err(Error::ShapeMismatch {
            expected: vec![model.dim()],
            actual: vec![x.len()],
        });
    }
    let cond = model.class(class)?;
    let Some(comp) = cond.single_component() else {
        return Ok(monte_carlo_expected_error(model, class, x, t, sched, quadrature)?.0);
    };
    let ab = sched.alpha_bar(t);
    let centred: Vec<f64> = x.iter().zip(comp.mean()).map(|(a, m)| a - m).collect();
    let z = comp.eigen_coordinates(&centred);
    let mut total = 0.0;
    for (zi, l) in z.iter().zip(comp.eigenvalues()) {
        let s = ab * l + 1.0 - ab;
        let bias = (1.0 - ab).sqrt() * ab.sqrt() * zi / s;
        let shrink = ab * l / s;
        total += bias * bias + shrink * shrink;
    }
    Ok(total / x.len() as f64)
}

/// Monte Carlo estimate and standard error of the expected squared error.
pub fn monte_carlo_expected_error(
    model: &GaussianClassModel,
    class: usize,
    x: &[f64],
    t: usize,
    sched: &NoiseSchedule,
    quadrature: &Quadrature,
) -> Result<(f64, f64)> {
    if quadrature.samples < 2 {
        return Err(Error::config("quadrature.samples", "need at least two samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(quadrature.seed);
    let mut errors = Vec::with_capacity(quadrature.samples);
    for _ in 0..quadrature.samples {
        let eps = standard_normal(x.len(), &mut rng);
        let x_t = forward_noise(x, t, &eps, sched)?;
        let hat = model.predict_eps(&x_t, t, Some(class), sched)?;
        errors.push(eps_error(&eps, &hat, &[x.len()], LossKind::SquaredL2, 0)?);
    }
    Ok(mean_and_stderr(&errors))
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    pub error: f64,
    pub stderr: f64,
}

/// Error of one class at a dense grid of timesteps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElboCurve {
    pub class: usize,
    pub points: Vec<CurvePoint>,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct BruteForceConfig {
    pub n_eps_per_t: usize,
    /// Evaluate every `stride`-th timestep starting at `t = 1`.
    pub stride: usize,
    pub seed: u64,
}

/// Evaluates the squared error at every (strided) timestep with
/// `n_eps_per_t` fresh noise draws each.
///
/// Noise at timestep `t` depends only on `(seed, t)`, so curves of different
/// classes under the same seed share their draws.
pub fn brute_force_elbo(
    x: &DataPoint,
    class: usize,
    denoiser: &dyn Denoiser,
    sched: &NoiseSchedule,
    config: &BruteForceConfig,
) -> Result<ElboCurve> {
    if config.n_eps_per_t == 0 {
        return Err(Error::config("n_eps_per_t", "need at least one noise draw per timestep"));
    }
    if config.stride == 0 {
        return Err(Error::config("stride", "must be positive"));
    }
    let mut points = Vec::new();
    for t in (1..=sched.steps()).step_by(config.stride) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, streams::ORACLE, t as u64));
        let mut errors = Vec::with_capacity(config.n_eps_per_t);
        for _ in 0..config.n_eps_per_t {
            let eps = standard_normal(x.dim(), &mut rng);
            let x_t = forward_noise(&x.values, t, &eps, sched)?;
            let hat = denoiser.predict_eps(&x_t, t, Some(class), sched)?;
            errors.push(eps_error(&eps, &hat, &x.shape, LossKind::SquaredL2, 0)?);
        }
        let (error, stderr) = mean_and_stderr(&errors);
        points.push(CurvePoint { t, error, stderr });
    }
    let mean = points.iter().map(|p| p.error).sum::<f64>() / points.len() as f64;
    Ok(ElboCurve { class, points, mean })
}

/// Writes curves as CSV with columns `t,class,error,stderr`.
pub fn write_curves_csv<W: Write>(writer: W, curves: &[ElboCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "class", "error", "stderr"])?;
    for curve in curves {
        for p in &curve.points {
            w.write_record([
                p.t.to_string(),
                curve.class.to_string(),
                p.error.to_string(),
                p.stderr.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Draws `n` labelled points: labels from `prior`, features from the class.
pub fn sample_labeled(
    model: &GaussianClassModel,
    prior: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<DataPoint>> {
    check_prior(model, prior)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let label = prior
                .iter()
                .position(|p| {
                    acc += p;
                    u < acc
                })
                .unwrap_or(prior.len() - 1);
            Ok(DataPoint::vector(model.sample_class(label, &mut rng)?).labeled(label))
        })
        .collect()
}

/// Fraction of labelled points the Bayes rule classifies correctly.
pub fn bayes_accuracy_on(model: &GaussianClassModel, prior: &[f64], points: &[DataPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::config("points", "need at least one point"));
    }
    let mut correct = 0usize;
    for p in points {
        let report = bayes_posterior_gmm(model, &p.values, prior)?;
        if Some(report.bayes_label) == p.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / points.len() as f64)
}

/// Bayes-rule accuracy on `n_test` points sampled from the model.
pub fn bayes_accuracy(model: &GaussianClassModel, prior: &[f64], n_test: usize, seed: u64) -> Result<f64> {
    if n_test == 0 {
        return Err(Error::config("n_test", "need at least one test point"));
    }
    bayes_accuracy_on(model, prior, &sample_labeled(model, prior, n_test, seed)?)
}
