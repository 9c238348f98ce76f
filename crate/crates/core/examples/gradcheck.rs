//! Finite-difference check of the network's backpropagated gradients.
//!
//! cargo run --release --example gradcheck

use diffusion_classifier::denoiser::{finite_diff_gradcheck, MlpConfig, MlpDenoiser, TrainingExample};
use diffusion_classifier::{NoiseSchedule, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let sched = NoiseSchedule::linear(1000)?;
    let config = MlpConfig {
        dim: 6,
        num_classes: 3,
        hidden: vec![16, 16],
        embed_dim: 8,
        unconditional: true,
        activation: Default::default(),
        zero_init_output: false,
    };
    let net = MlpDenoiser::new(config, &mut ChaCha8Rng::seed_from_u64(1))?;
    let x0 = [0.3, -1.0, 0.5, 0.0, 1.2, -0.4];
    let eps = [1.0, 0.2, -0.7, 0.4, -1.1, 0.9];
    for (t, class) in [(1, Some(0)), (500, Some(2)), (1000, None)] {
        let example = TrainingExample { x0: &x0, t, eps: &eps, class };
        let r = finite_diff_gradcheck(&net, &example, &sched, 1e-4, 1e-3)?;
        println!(
            "t = {t:>4}, class {class:?}: max relative deviation {:.2e} at parameter {} of {} ({})",
            r.max_relative_deviation,
            r.worst_param,
            r.num_params,
            if r.passed { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}
