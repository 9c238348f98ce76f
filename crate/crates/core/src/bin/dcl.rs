use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diffusion_classifier::config::{parse_config, RunConfig};
use diffusion_classifier::run;
use diffusion_classifier::Result;

#[derive(Parser)]
#[command(name = "dcl", version, about = "Zero-shot classification with class-conditional diffusion denoisers")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the evaluation seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write one CSV row per evaluated (class, trial) pair.
    #[arg(long, global = true)]
    trace: bool,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured network and save a checkpoint.
    Train,
    /// Classify the test set and write per-input predictions.
    Classify,
    /// Accuracy and evaluation count of the configured classifier.
    Benchmark,
    /// Accuracy of one-trial classifiers at a grid of fixed timesteps.
    SweepTimesteps,
    /// Accuracy of each study strategy over the study budgets.
    Scaling,
    /// Paired versus unpaired variance of error differences.
    Variance,
    /// Two-caption, two-image text score.
    Winoground {
        /// CSV of `example_id,i,j,score` rows; the compositional fixture is scored otherwise.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Finite-difference gradient check of a small random network.
    Gradcheck,
}

fn execute(cli: Cli) -> Result<String> {
    let mut config = match &cli.common.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.common.out {
        config.output_dir = out;
    }
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| diffusion_classifier::Error::Config {
                field: "threads".into(),
                reason: e.to_string(),
            })?;
    }
    let out = config.output_dir.clone();
    match cli.command {
        Command::Train => run::cmd_train(&config, &out),
        Command::Classify => run::cmd_classify(&config, &out, cli.common.trace),
        Command::Benchmark => run::cmd_benchmark(&config, &out),
        Command::SweepTimesteps => run::cmd_sweep_timesteps(&config, &out),
        Command::Scaling => run::cmd_scaling(&config, &out),
        Command::Variance => run::cmd_variance(&config, &out),
        Command::Winoground { scores } => run::cmd_winoground(&config, &out, scores.as_deref()),
        Command::Gradcheck => run::cmd_gradcheck(&config, &out),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
