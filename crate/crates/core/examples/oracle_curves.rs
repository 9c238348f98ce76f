//! Per-timestep expected error of the true and a wrong class, from dense
//! Monte Carlo and from the closed form, written as CSV on stdout.
//!
//! cargo run --release --example oracle_curves > curves.csv

use diffusion_classifier::harness::{fixtures, gen_dataset};
use diffusion_classifier::oracle::{analytic_expected_error, brute_force_elbo, write_curves_csv, BruteForceConfig};
use diffusion_classifier::{LossKind, NoiseSchedule, Result};

fn main() -> Result<()> {
    let sched = NoiseSchedule::linear(1000)?;
    let data = gen_dataset(&fixtures::standard_gmm(), 1, 3)?;
    let model = data.model.clone().expect("gmm datasets carry their model");
    let x = &data.samples[0];
    let label = x.label.unwrap_or(0);
    let cfg = BruteForceConfig { n_eps_per_t: 200, stride: 25, seed: 0 };

    let curves = [
        brute_force_elbo(x, label, &model, &sched, &cfg)?,
        brute_force_elbo(x, (label + 1) % 4, &model, &sched, &cfg)?,
    ];
    for c in &curves {
        let exact: f64 = c
            .points
            .iter()
            .map(|p| analytic_expected_error(&model, c.class, &x.values, p.t, &sched, LossKind::SquaredL2))
            .sum::<Result<f64>>()?
            / c.points.len() as f64;
        eprintln!("class {}: curve mean {:.4}, closed-form mean {exact:.4}", c.class, c.mean);
    }
    write_curves_csv(std::io::stdout(), &curves)
}
