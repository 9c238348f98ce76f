//! Config-driven entry points behind the command-line subcommands. Each
//! writes CSV files into an output directory and returns a one-line summary.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::classifier::TraceRecord;
use crate::config::{DenoiserSpec, RunConfig};
use crate::denoiser::{
    finite_diff_gradcheck, train_denoiser, Activation, Denoiser, GaussianClassModel, LossPoint, MlpConfig, MlpDenoiser,
    TrainingExample,
};
use crate::error::{Error, Result};
use crate::harness::{
    diffusion_score_matrix, gen_dataset, read_score_matrices, run_benchmark, scaling_curve, timestep_accuracy_curve,
    timestep_grid, variance_report, winoground_text_score, write_rows_csv, ExperimentReport, RunMetadata,
    DatasetSpec, SyntheticDataset, TemplateSet,
};
use crate::noise::standard_normal;
use crate::schedule::NoiseSchedule;
use crate::seed::{derive_seed, streams};

pub const CHECKPOINT_FILE: &str = "checkpoint.dck";

/// A constructed denoiser of either backend.
pub enum BuiltDenoiser {
    Analytic(GaussianClassModel),
    Mlp(MlpDenoiser),
}

impl BuiltDenoiser {
    pub fn as_dyn(&self) -> &dyn Denoiser {
        match self {
            BuiltDenoiser::Analytic(m) => m,
            BuiltDenoiser::Mlp(n) => n,
        }
    }
}

/// Schedule, test data and denoiser of a run.
pub struct Prepared {
    pub sched: NoiseSchedule,
    pub test: SyntheticDataset,
    pub denoiser: BuiltDenoiser,
    pub train_trace: Vec<LossPoint>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_csv_file<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf> {
    write_rows_csv(create(dir, name)?, rows)?;
    Ok(dir.join(name))
}

fn write_report(dir: &Path, name: &str, report: &ExperimentReport) -> Result<PathBuf> {
    report.write_csv(create(dir, name)?)?;
    Ok(dir.join(name))
}

/// Trains the configured network on a freshly generated training set.
pub fn train_mlp(config: &RunConfig) -> Result<(MlpDenoiser, Vec<LossPoint>)> {
    let DenoiserSpec::Mlp { train, .. } = &config.denoiser else {
        return Err(Error::config("denoiser", "training needs an mlp denoiser"));
    };
    let sched = config.schedule()?;
    let (train_seed, _) = config.dataset_seeds();
    let data = gen_dataset(&config.dataset, config.train_samples_per_class, train_seed)?;
    let mlp = config
        .denoiser
        .mlp_config(data.dim(), data.num_classes)
        .expect("mlp denoiser");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(train.seed, streams::TRAIN, 0));
    let net = MlpDenoiser::new(mlp, &mut rng)?;
    let outcome = train_denoiser(net, &data.samples, &sched, train)?;
    Ok((outcome.net, outcome.trace))
}

/// Builds the test set and denoiser. A network is loaded from its checkpoint
/// when one is configured and trained otherwise.
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let sched = config.schedule()?;
    let (_, test_seed) = config.dataset_seeds();
    let test = gen_dataset(&config.dataset, config.samples_per_class, test_seed)?;
    let (denoiser, train_trace) = match &config.denoiser {
        DenoiserSpec::Analytic => {
            let model = test.model.clone().expect("validated: gaussian-mixture dataset");
            (BuiltDenoiser::Analytic(model), Vec::new())
        }
        DenoiserSpec::Mlp {
            checkpoint: Some(path), ..
        } => {
            let (net, _) = load_checkpoint(path)?;
            if net.config().dim != test.dim() || net.config().num_classes != test.num_classes {
                return Err(Error::config("denoiser.checkpoint", "checkpoint does not match the dataset"));
            }
            (BuiltDenoiser::Mlp(net), Vec::new())
        }
        DenoiserSpec::Mlp { .. } => {
            let (net, trace) = train_mlp(config)?;
            (BuiltDenoiser::Mlp(net), trace)
        }
    };
    Ok(Prepared {
        sched,
        test,
        denoiser,
        train_trace,
    })
}

pub fn cmd_train(config: &RunConfig, out: &Path) -> Result<String> {
    config.validate()?;
    let (net, trace) = train_mlp(config)?;
    let path = out.join(CHECKPOINT_FILE);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_checkpoint(&net, config, &path)?;
    write_csv_file(out, "train_loss.csv", &trace)?;
    let last = trace.last().map_or(f64::NAN, |p| p.loss);
    Ok(format!("trained {} parameters, final loss {last:.6}, saved {}", net.num_params(), path.display()))
}

#[derive(Serialize)]
struct PredictionRow {
    index: usize,
    label: usize,
    predicted: usize,
    evaluations: usize,
    min_error: f64,
    top_posterior: f64,
}

#[derive(Serialize)]
struct TraceRow {
    input: usize,
    class: usize,
    trial: usize,
    t: usize,
    error: f64,
    stage: usize,
    point_hash: u64,
}

impl TraceRow {
    fn new(input: usize, r: &TraceRecord) -> Self {
        Self {
            input,
            class: r.class,
            trial: r.trial,
            t: r.t,
            error: r.error,
            stage: r.stage,
            point_hash: r.point_hash,
        }
    }
}

pub fn cmd_classify(config: &RunConfig, out: &Path, trace: bool) -> Result<String> {
    let p = prepare(config)?;
    let outcome = run_benchmark(&p.test, p.denoiser.as_dyn(), &p.sched, &config.benchmark(trace), config.seed)?;
    let rows: Vec<PredictionRow> = outcome
        .results
        .iter()
        .zip(&outcome.labels)
        .enumerate()
        .map(|(index, (r, &label))| PredictionRow {
            index,
            label,
            predicted: r.predicted,
            evaluations: r.evaluations,
            min_error: r.mean_errors.iter().copied().filter(|e| e.is_finite()).fold(f64::INFINITY, f64::min),
            top_posterior: r.posterior.iter().copied().fold(0.0, f64::max),
        })
        .collect();
    write_csv_file(out, "predictions.csv", &rows)?;
    if trace {
        let records: Vec<TraceRow> = outcome
            .results
            .iter()
            .enumerate()
            .flat_map(|(input, r)| r.trace.iter().map(move |record| TraceRow::new(input, record)))
            .collect();
        write_csv_file(out, "trace.csv", &records)?;
    }
    Ok(format!(
        "classified {} inputs: accuracy {:.4}, mean per-class accuracy {:.4}, {} evaluations",
        rows.len(),
        outcome.accuracy,
        outcome.mean_per_class_accuracy,
        outcome.evaluations
    ))
}

pub fn cmd_benchmark(config: &RunConfig, out: &Path) -> Result<String> {
    let p = prepare(config)?;
    let bench = config.benchmark(false);
    let outcome = run_benchmark(&p.test, p.denoiser.as_dyn(), &p.sched, &bench, config.seed)?;
    let mut report = ExperimentReport::new(RunMetadata::for_config(config, config.seed)?);
    report.rows.push(outcome.row(config.strategy.label(), bench.budget()));
    write_report(out, "benchmark.csv", &report)?;
    Ok(format!(
        "accuracy {:.4}, mean per-class accuracy {:.4}, {} evaluations",
        outcome.accuracy, outcome.mean_per_class_accuracy, outcome.evaluations
    ))
}

pub fn cmd_sweep_timesteps(config: &RunConfig, out: &Path) -> Result<String> {
    let p = prepare(config)?;
    let grid = timestep_grid(config.studies.sweep_points, p.sched.steps());
    let curve = timestep_accuracy_curve(&p.test, p.denoiser.as_dyn(), &p.sched, &grid, &config.options(false), config.seed)?;
    write_csv_file(out, "timestep_accuracy.csv", &curve)?;
    let best = curve.iter().max_by(|a, b| a.accuracy.total_cmp(&b.accuracy)).expect("non-empty grid");
    Ok(format!("best single timestep t = {} with accuracy {:.4}", best.t, best.accuracy))
}

pub fn cmd_scaling(config: &RunConfig, out: &Path) -> Result<String> {
    let p = prepare(config)?;
    let s = &config.studies;
    let report = scaling_curve(
        &p.test,
        p.denoiser.as_dyn(),
        &p.sched,
        &s.scaling_strategies,
        &s.scaling_budgets,
        &config.options(false),
        config.seed,
    )?;
    let path = write_report(out, "scaling.csv", &report)?;
    Ok(format!("{} rows written to {}", report.rows.len(), path.display()))
}

#[derive(Serialize)]
struct VarianceRow {
    input: usize,
    label: usize,
    paired_variance: f64,
    unpaired_variance: f64,
}

pub fn cmd_variance(config: &RunConfig, out: &Path) -> Result<String> {
    let p = prepare(config)?;
    let s = &config.studies;
    let classes: Vec<usize> = (0..p.test.num_classes).collect();
    let rows = p
        .test
        .samples
        .iter()
        .take(s.variance_inputs)
        .enumerate()
        .map(|(i, x)| {
            let r = variance_report(
                x,
                &classes,
                p.denoiser.as_dyn(),
                &p.sched,
                s.variance_sets,
                s.variance_set_size,
                &config.strategy,
                &config.options(false),
                derive_seed(config.seed, streams::VARIANCE, i as u64),
            )?;
            Ok(VarianceRow {
                input: i,
                label: x.label.unwrap_or(0),
                paired_variance: r.paired_variance,
                unpaired_variance: r.unpaired_variance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv_file(out, "variance.csv", &rows)?;
    let below = rows.iter().filter(|r| r.paired_variance < r.unpaired_variance).count();
    Ok(format!("paired variance below unpaired for {below} of {} inputs", rows.len()))
}

#[derive(Serialize)]
struct WinogroundRow {
    example_id: String,
    s00: f64,
    s01: f64,
    s10: f64,
    s11: f64,
    text_correct: bool,
}

/// Text score of user-supplied score matrices, or of the compositional image
/// fixture when `scores` is `None`.
pub fn cmd_winoground(config: &RunConfig, out: &Path, scores: Option<&Path>) -> Result<String> {
    let examples = match scores {
        Some(path) => read_score_matrices(File::open(path).map_err(|e| Error::io(path, e))?)?,
        None => {
            if !matches!(config.dataset, DatasetSpec::Templates { set: TemplateSet::Compositional, .. }) {
                return Err(Error::config(
                    "dataset",
                    "without a score file, winoground needs the compositional template dataset",
                ));
            }
            let p = prepare(config)?;
            let k = p.test.num_classes;
            let per_class = p.test.len() / k;
            let mut examples = Vec::new();
            for j in 0..per_class {
                for pair in [[0usize, 1usize], [2, 3]] {
                    let images = [&p.test.samples[j * k + pair[0]], &p.test.samples[j * k + pair[1]]];
                    let seed = derive_seed(config.seed, streams::CLASSIFY, (j * k + pair[0]) as u64);
                    let m = diffusion_score_matrix(
                        images,
                        pair,
                        p.denoiser.as_dyn(),
                        &p.sched,
                        &config.strategy,
                        config.studies.winoground_trials,
                        &config.options(false),
                        seed,
                    )?;
                    examples.push((format!("{j}-{}{}", pair[0], pair[1]), m));
                }
            }
            examples
        }
    };
    let matrices: Vec<_> = examples.iter().map(|(_, m)| *m).collect();
    let rows: Vec<WinogroundRow> = examples
        .iter()
        .map(|(id, m)| WinogroundRow {
            example_id: id.clone(),
            s00: m.s[0][0],
            s01: m.s[0][1],
            s10: m.s[1][0],
            s11: m.s[1][1],
            text_correct: m.text_correct(),
        })
        .collect();
    write_csv_file(out, "winoground.csv", &rows)?;
    Ok(format!("text score {:.4} over {} examples", winoground_text_score(&matrices), rows.len()))
}

/// Finite-difference check of a small random network. Fails with a numeric
/// error when the deviation exceeds `1e-3`.
pub fn cmd_gradcheck(config: &RunConfig, out: &Path) -> Result<String> {
    let sched = config.schedule()?;
    let activation = match &config.denoiser {
        DenoiserSpec::Mlp { activation, .. } => *activation,
        DenoiserSpec::Analytic => Activation::Silu,
    };
    let cfg = MlpConfig {
        dim: 4,
        num_classes: 3,
        hidden: vec![8, 8],
        embed_dim: 6,
        unconditional: true,
        activation,
        zero_init_output: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = MlpDenoiser::new(cfg, &mut rng)?;
    let x0 = standard_normal(4, &mut rng);
    let eps = standard_normal(4, &mut rng);
    let t = sched.steps() / 2;
    let example = TrainingExample {
        x0: &x0,
        t,
        eps: &eps,
        class: Some(1),
    };
    let report = finite_diff_gradcheck(&net, &example, &sched, 1e-4, 1e-3)?;
    write_csv_file(out, "gradcheck.csv", std::slice::from_ref(&report))?;
    let summary = format!(
        "{} parameters, max relative deviation {:.3e} (tolerance {:.0e})",
        report.num_params, report.max_relative_deviation, report.tolerance
    );
    if report.passed {
        Ok(summary)
    } else {
        Err(Error::Numeric(format!("gradient check failed: {summary}")))
    }
}
