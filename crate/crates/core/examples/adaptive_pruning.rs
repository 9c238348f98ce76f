//! Cutting the cost of many-class problems: staged elimination, and a noisy
//! oracle that shortlists five candidates before the diffusion classifier.
//!
//! cargo run --release --example adaptive_pruning

use diffusion_classifier::harness::{fixtures, gen_dataset, run_benchmark, BenchmarkConfig, PrunerConfig};
use diffusion_classifier::{NoiseSchedule, Result, StagePlan, TimestepStrategy};

fn main() -> Result<()> {
    let sched = NoiseSchedule::linear(1000)?;
    let data = gen_dataset(&fixtures::many_class_gmm(), 10, 1)?;
    let model = data.model.clone().expect("gmm datasets carry their model");

    let naive = BenchmarkConfig::naive(TimestepStrategy::UniformRandom, 250);
    let mut staged = naive.clone();
    staged.plan = Some(StagePlan { keep: vec![5, 1], trials: vec![25, 250] });
    let mut pruned = BenchmarkConfig::naive(TimestepStrategy::UniformRandom, 64);
    pruned.prune = Some(PrunerConfig { k: 5, label_noise: 0.2 });

    for (name, cfg) in [("naive 250", naive), ("staged 25/250", staged), ("pruned k=5, 64", pruned)] {
        let out = run_benchmark(&data, &model, &sched, &cfg, 5)?;
        println!(
            "{name:<15} accuracy {:.4}  evaluations per input {}",
            out.accuracy,
            out.evaluations / data.len()
        );
    }
    Ok(())
}
