//! Accuracy under different ways of drawing the injected noise, and with
//! squared versus absolute error.
//!
//! cargo run --release --example noise_variants

use diffusion_classifier::harness::{fixtures, gen_dataset, run_benchmark, BenchmarkConfig};
use diffusion_classifier::{LossKind, NoiseSchedule, NoiseVariant, Result, TimestepStrategy};

fn main() -> Result<()> {
    let sched = NoiseSchedule::linear(1000)?;
    let data = gen_dataset(&fixtures::standard_gmm(), 100, 1)?;
    let model = data.model.clone().expect("gmm datasets carry their model");
    let variants = [
        NoiseVariant::StandardNormal,
        NoiseVariant::Zero,
        NoiseVariant::TruncatedNormal { low: -1.0, high: 1.0 },
        NoiseVariant::ExpectedNorm,
    ];
    for noise in variants {
        for loss in [LossKind::SquaredL2, LossKind::L1] {
            let mut cfg = BenchmarkConfig::naive(TimestepStrategy::UniformRandom, 100);
            cfg.options.noise = noise;
            cfg.options.loss = loss;
            let out = run_benchmark(&data, &model, &sched, &cfg, 4)?;
            println!("{noise:?} / {loss:?}: accuracy {:.4}", out.accuracy);
        }
    }
    Ok(())
}
