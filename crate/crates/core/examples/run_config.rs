//! Loads a JSON run configuration and reports the benchmark accuracy, the
//! same path the `dcl benchmark` command takes.
//!
//! cargo run --release --example run_config -- crates/core/configs/standard.json

use diffusion_classifier::config::parse_config;
use diffusion_classifier::harness::run_benchmark;
use diffusion_classifier::run::prepare;
use diffusion_classifier::Result;

fn main() -> Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "crates/core/configs/reference.json".into());
    let config = parse_config(path.as_ref())?;
    let p = prepare(&config)?;
    let out = run_benchmark(&p.test, p.denoiser.as_dyn(), &p.sched, &config.benchmark(false), config.seed)?;
    println!(
        "{path}: {} inputs, accuracy {:.4}, mean per-class accuracy {:.4}, {} evaluations",
        p.test.len(),
        out.accuracy,
        out.mean_per_class_accuracy,
        out.evaluations
    );
    Ok(())
}
