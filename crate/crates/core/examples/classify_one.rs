//! Classifies a single input and prints the per-class mean errors and the
//! resulting posterior.
//!
//! cargo run --release --example classify_one

use diffusion_classifier::denoiser::GaussianClassModel;
use diffusion_classifier::{classify_naive, ClassifierOptions, DataPoint, NoiseSchedule, Result, TimestepStrategy};

fn main() -> Result<()> {
    let sched = NoiseSchedule::linear(1000)?;
    let model = GaussianClassModel::isotropic(vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![-2.0, -2.0]], 1.0)?;
    let x = DataPoint::vector(vec![1.2, 0.8]);

    let opts = ClassifierOptions::default();
    let r = classify_naive(&x, &[0, 1, 2], &model, &sched, &TimestepStrategy::UniformRandom, 256, &opts, 0)?;
    for ((c, e), p) in r.classes.iter().zip(&r.mean_errors).zip(&r.posterior) {
        println!("class {c}: mean error {e:.5}, posterior {p:.4}");
    }
    println!("predicted {} after {} evaluations", r.predicted, r.evaluations);
    Ok(())
}
