//! Sharing `(t, eps)` samples across classes reduces the variance of
//! error differences compared to independent samples per class.
//!
//! cargo run --release --example paired_variance

use diffusion_classifier::harness::{fixtures, gen_dataset, variance_report};
use diffusion_classifier::{ClassifierOptions, NoiseSchedule, Result, TimestepStrategy};

fn main() -> Result<()> {
    let sched = NoiseSchedule::linear(1000)?;
    let data = gen_dataset(&fixtures::standard_gmm(), 5, 1)?;
    let model = data.model.clone().expect("gmm datasets carry their model");
    let opts = ClassifierOptions::default();
    for (i, x) in data.samples.iter().enumerate() {
        let r = variance_report(x, &[0, 1, 2, 3], &model, &sched, 64, 16, &TimestepStrategy::UniformRandom, &opts, i as u64)?;
        println!(
            "input {i:>2} (class {}): paired {:.3e}  unpaired {:.3e}  ratio {:.2}",
            x.label.unwrap_or(0),
            r.paired_variance,
            r.unpaired_variance,
            r.unpaired_variance / r.paired_variance
        );
    }
    Ok(())
}
