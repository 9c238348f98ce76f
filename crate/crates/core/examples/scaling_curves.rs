//! Accuracy against trial budget for several timestep strategies, written as
//! CSV on stdout.
//!
//! cargo run --release --example scaling_curves > scaling.csv

use diffusion_classifier::harness::{fixtures, gen_dataset, scaling_curve};
use diffusion_classifier::{ClassifierOptions, NoiseSchedule, Result, TimestepStrategy};

fn main() -> Result<()> {
    let sched = NoiseSchedule::linear(1000)?;
    let data = gen_dataset(&fixtures::standard_gmm(), 200, 1)?;
    let model = data.model.clone().expect("gmm datasets carry their model");
    let strategies = [
        TimestepStrategy::UniformRandom,
        TimestepStrategy::EvenlySpaced { count: 10 },
        TimestepStrategy::FixedSingle { t: 500 },
        TimestepStrategy::Window { center: 500, halfwidth: 25 },
    ];
    let report = scaling_curve(&data, &model, &sched, &strategies, &[10, 20, 50, 100, 200], &ClassifierOptions::default(), 3)?;
    report.write_csv(std::io::stdout())
}
