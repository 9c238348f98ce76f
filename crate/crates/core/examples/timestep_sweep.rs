//! Trains the template-image denoiser, then measures single-timestep
//! accuracy across the noise range. Intermediate timesteps classify best.
//!
//! cargo run --release --example timestep_sweep

use diffusion_classifier::denoiser::{train_denoiser, MlpDenoiser};
use diffusion_classifier::harness::{fixtures, gen_dataset, timestep_accuracy_curve, timestep_grid};
use diffusion_classifier::{ClassifierOptions, NoiseSchedule, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let sched = NoiseSchedule::linear(1000)?;
    let spec = fixtures::template_images();
    let train = gen_dataset(&spec, 250, 1)?;
    let test = gen_dataset(&spec, 100, 2)?;

    let net = MlpDenoiser::new(fixtures::template_mlp(4), &mut ChaCha8Rng::seed_from_u64(0))?;
    let out = train_denoiser(net, &train.samples, &sched, &fixtures::template_training())?;
    println!("final training loss {:.4}", out.trace.last().map_or(f64::NAN, |p| p.loss));

    let curve = timestep_accuracy_curve(&test, &out.net, &sched, &timestep_grid(10, 1000), &ClassifierOptions::default(), 3)?;
    for p in &curve {
        println!("t = {:>4}  accuracy {:.4}  {}", p.t, p.accuracy, "#".repeat((p.accuracy * 40.0) as usize));
    }
    Ok(())
}
