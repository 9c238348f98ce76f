//! Diffusion classifier with the exact Gaussian denoiser versus the Bayes
//! classifier on the same test points.
//!
//! cargo run --release --example bayes_agreement

use diffusion_classifier::harness::{fixtures, gen_dataset, run_benchmark, BenchmarkConfig};
use diffusion_classifier::oracle::{bayes_accuracy_on, uniform_prior};
use diffusion_classifier::{NoiseSchedule, Result, TimestepStrategy};

fn main() -> Result<()> {
    let sched = NoiseSchedule::linear(1000)?;
    let data = gen_dataset(&fixtures::separated_gmm(), 125, 1)?;
    let model = data.model.clone().expect("gmm datasets carry their model");

    for trials in [1, 4, 16, 64] {
        let cfg = BenchmarkConfig::naive(TimestepStrategy::UniformRandom, trials);
        let out = run_benchmark(&data, &model, &sched, &cfg, 2)?;
        println!("{trials:>3} trials: accuracy {:.4} ({} evaluations)", out.accuracy, out.evaluations);
    }
    let bayes = bayes_accuracy_on(&model, &uniform_prior(data.num_classes), &data.samples)?;
    println!("bayes:      accuracy {bayes:.4}");
    Ok(())
}
