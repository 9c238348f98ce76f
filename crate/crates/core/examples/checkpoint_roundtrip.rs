//! Trains a small network, saves it with its run configuration, and checks
//! the reloaded network predicts identically.
//!
//! cargo run --release --example checkpoint_roundtrip

use diffusion_classifier::checkpoint::{load_checkpoint, save_checkpoint};
use diffusion_classifier::config::{DenoiserSpec, RunConfig};
use diffusion_classifier::denoiser::{Denoiser, TrainConfig};
use diffusion_classifier::run::train_mlp;
use diffusion_classifier::Result;

fn main() -> Result<()> {
    let config = RunConfig {
        train_samples_per_class: 50,
        denoiser: DenoiserSpec::Mlp {
            hidden: vec![64, 64],
            embed_dim: 32,
            unconditional: true,
            activation: Default::default(),
            zero_init_output: true,
            train: TrainConfig { steps: 300, ..Default::default() },
            checkpoint: None,
        },
        ..Default::default()
    };
    let (net, trace) = train_mlp(&config)?;
    println!("trained {} parameters, final loss {:.4}", net.num_params(), trace.last().map_or(f64::NAN, |p| p.loss));

    let dir = std::env::temp_dir().join("dcl-checkpoint-example");
    std::fs::create_dir_all(&dir).map_err(|e| diffusion_classifier::Error::io(&dir, e))?;
    let path = dir.join("model.dck");
    save_checkpoint(&net, &config, &path)?;
    let (loaded, loaded_config) = load_checkpoint(&path)?;

    let sched = config.schedule()?;
    let x = vec![0.5; 8];
    let same = (1..=1000).step_by(111).all(|t| {
        net.predict_eps(&x, t, Some(1), &sched).ok() == loaded.predict_eps(&x, t, Some(1), &sched).ok()
    });
    println!("saved to {}", path.display());
    println!("predictions identical: {same}; configuration identical: {}", loaded_config == config);
    Ok(())
}
