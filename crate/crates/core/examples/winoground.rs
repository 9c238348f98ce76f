//! Text score on compositional images: two images built from the same parts
//! in swapped positions, each paired with its own class as the caption.
//!
//! cargo run --release --example winoground

use diffusion_classifier::denoiser::{train_denoiser, MlpDenoiser};
use diffusion_classifier::harness::{diffusion_score_matrix, fixtures, gen_dataset, winoground_text_score};
use diffusion_classifier::{ClassifierOptions, NoiseSchedule, Result, TimestepStrategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let sched = NoiseSchedule::linear(1000)?;
    let spec = fixtures::compositional_images();
    let train = gen_dataset(&spec, 250, 1)?;
    let test = gen_dataset(&spec, 20, 2)?;
    let net = MlpDenoiser::new(fixtures::template_mlp(4), &mut ChaCha8Rng::seed_from_u64(0))?;
    let net = train_denoiser(net, &train.samples, &sched, &fixtures::template_training())?.net;

    let mut matrices = Vec::new();
    for (j, group) in test.samples.chunks(4).enumerate() {
        for pair in [[0, 1], [2, 3]] {
            let images = [&group[pair[0]], &group[pair[1]]];
            let m = diffusion_score_matrix(
                images,
                pair,
                &net,
                &sched,
                &TimestepStrategy::UniformRandom,
                100,
                &ClassifierOptions::default(),
                j as u64,
            )?;
            matrices.push(m);
        }
    }
    println!("text score {:.3} over {} examples", winoground_text_score(&matrices), matrices.len());
    Ok(())
}
