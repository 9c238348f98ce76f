//! End-to-end acceptance checks. Each prints one PASS/FAIL line; the process
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use diffusion_classifier::classifier::{classify_adaptive, classify_naive, point_errors, ClassifierOptions, GuidanceConfig, LossKind};
use diffusion_classifier::denoiser::{finite_diff_gradcheck, train_denoiser, MlpConfig, MlpDenoiser, TrainingExample};
use diffusion_classifier::harness::{
    fixtures, gen_dataset, run_benchmark, scaling_curve, timestep_accuracy_curve, timestep_grid, variance_report,
    winoground_text_score, BenchmarkConfig, PrunerConfig, ScoreMatrix, SyntheticDataset,
};
use diffusion_classifier::noise::NoiseVariant;
use diffusion_classifier::oracle::{analytic_expected_error, bayes_accuracy_on, uniform_prior};
use diffusion_classifier::schedule::NoiseSchedule;
use diffusion_classifier::strategy::{make_sample_set, StagePlan, TimestepStrategy};
use diffusion_classifier::{DataPoint, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<(bool, String)>;

fn check(name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (ok, detail) = match result {
        Ok((ok, detail)) => (ok && elapsed <= limit, detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} {name}: {detail} [{:.1}s, limit {}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn sched() -> NoiseSchedule {
    NoiseSchedule::linear(1000).expect("valid schedule")
}

fn bayes_agreement() -> Outcome {
    let sched = sched();
    let data = gen_dataset(&fixtures::separated_gmm(), 125, 1)?;
    let model = data.model.clone().expect("gmm data has a model");
    let out = run_benchmark(&data, &model, &sched, &BenchmarkConfig::naive(TimestepStrategy::UniformRandom, 64), 2)?;
    let bayes = bayes_accuracy_on(&model, &uniform_prior(4), &data.samples)?;
    let gap = (out.accuracy - bayes).abs();
    Ok((
        gap <= 0.02,
        format!("{} points, classifier {:.4}, bayes {:.4}, gap {:.4} (<= 0.02)", data.len(), out.accuracy, bayes, gap),
    ))
}

fn paired_variance() -> Outcome {
    let sched = sched();
    let data = gen_dataset(&fixtures::standard_gmm(), 25, 1)?;
    let model = data.model.clone().expect("gmm data has a model");
    let opts = ClassifierOptions::default();
    let mut wins = 0;
    for (i, x) in data.samples.iter().take(100).enumerate() {
        let r = variance_report(x, &[0, 1, 2, 3], &model, &sched, 64, 16, &TimestepStrategy::UniformRandom, &opts, i as u64)?;
        if r.paired_variance < r.unpaired_variance {
            wins += 1;
        }
    }
    Ok((wins >= 95, format!("paired below unpaired on {wins} of 100 inputs (>= 95)")))
}

fn adaptive_equivalence() -> Outcome {
    let sched = sched();
    let data = gen_dataset(&fixtures::separated_gmm(), 25, 3)?;
    let model = data.model.clone().expect("gmm data has a model");
    let opts = ClassifierOptions { trace: true, ..Default::default() };
    let classes = [0, 1, 2, 3];
    let plan = StagePlan::full_keep(4, 64);
    let mut equal = 0;
    for (i, x) in data.samples.iter().enumerate() {
        let strategy = TimestepStrategy::UniformRandom;
        let naive = classify_naive(x, &classes, &model, &sched, &strategy, 64, &opts, i as u64)?;
        let adaptive = classify_adaptive(x, &classes, &model, &sched, &plan, &strategy, &opts, i as u64)?;
        let bits = |v: &[f64]| v.iter().map(|e| e.to_bits()).collect::<Vec<_>>();
        if naive == adaptive && bits(&naive.mean_errors) == bits(&adaptive.mean_errors) {
            equal += 1;
        }
    }
    Ok((equal == data.len(), format!("bit-identical on {equal} of {} inputs", data.len())))
}

struct Templates {
    test: SyntheticDataset,
    net: MlpDenoiser,
}

fn train_templates() -> Result<Templates> {
    let sched = sched();
    let spec = fixtures::template_images();
    let train = gen_dataset(&spec, 250, 1)?;
    let test = gen_dataset(&spec, 100, 2)?;
    let net = MlpDenoiser::new(fixtures::template_mlp(4), &mut ChaCha8Rng::seed_from_u64(0))?;
    let out = train_denoiser(net, &train.samples, &sched, &fixtures::template_training())?;
    Ok(Templates { test, net: out.net })
}

fn timestep_shape(Templates { test, net }: &Templates) -> Outcome {
    let sched = sched();
    let curve = timestep_accuracy_curve(test, net, &sched, &timestep_grid(10, 1000), &ClassifierOptions::default(), 3)?;
    let best = curve.iter().max_by(|a, b| a.accuracy.total_cmp(&b.accuracy)).expect("non-empty grid");
    let first = curve.first().expect("non-empty grid");
    let last = curve.last().expect("non-empty grid");
    let ok = (200..=800).contains(&best.t) && best.accuracy >= first.accuracy + 0.10 && best.accuracy >= last.accuracy + 0.10;
    Ok((
        ok,
        format!(
            "argmax t={} acc {:.4}; t=1 acc {:.4}; t=T acc {:.4} (argmax in [200, 800], margin >= 0.10)",
            best.t, best.accuracy, first.accuracy, last.accuracy
        ),
    ))
}

fn pure_noise_near_chance(Templates { test, net }: &Templates) -> Outcome {
    let sched = sched();
    let curve = timestep_accuracy_curve(test, net, &sched, &[1000], &ClassifierOptions::default(), 7)?;
    let chance = 1.0 / test.num_classes as f64;
    let acc = curve[0].accuracy;
    Ok((acc <= chance + 0.10, format!("accuracy at t=T {acc:.4}, chance {chance:.2} (<= chance + 0.10)")))
}

fn scaling_direction() -> Outcome {
    let sched = sched();
    let data = gen_dataset(&fixtures::standard_gmm(), 400, 1)?;
    let model = data.model.clone().expect("gmm data has a model");
    let strategies = [
        TimestepStrategy::UniformRandom,
        TimestepStrategy::EvenlySpaced { count: 10 },
        TimestepStrategy::FixedSingle { t: 500 },
        TimestepStrategy::Window { center: 500, halfwidth: 25 },
    ];
    let budgets = [10, 20, 50, 100, 200, 500, 1000];
    let report = scaling_curve(&data, &model, &sched, &strategies, &budgets, &ClassifierOptions::default(), 3)?;
    let mut ok = true;
    let mut worst_drop: f64 = 0.0;
    for s in &strategies {
        let accs: Vec<f64> = budgets.iter().map(|&b| report.accuracy(&s.label(), b).unwrap_or(f64::NAN)).collect();
        for w in accs.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
            ok &= w[1] >= w[0] - 0.01;
        }
    }
    let even = report.accuracy(&strategies[1].label(), 1000).unwrap_or(f64::NAN);
    let window = report.accuracy(&strategies[3].label(), 1000).unwrap_or(f64::NAN);
    ok &= even >= window - 0.01;
    Ok((
        ok,
        format!("largest budget-to-budget drop {worst_drop:.4} (<= 0.01); at 1000 trials even {even:.4} vs window {window:.4}"),
    ))
}

fn exactness(Templates { test, net }: &Templates) -> Outcome {
    let sched = sched();
    let set = make_sample_set(&TimestepStrategy::UniformRandom, NoiseVariant::StandardNormal, 16, 1000, 64, 5)?;
    let classes = [0, 1, 2, 3];
    let bits = |e: Vec<Vec<f64>>| e.into_iter().flatten().map(f64::to_bits).collect::<Vec<_>>();

    let plain = ClassifierOptions::default();
    let w0 = ClassifierOptions { guidance: GuidanceConfig::weight(0.0), ..plain };
    let mut guidance_same = true;
    let mut crop_same = true;
    for x in test.samples.iter().take(20) {
        let reference = bits(point_errors(x, &classes, net, &sched, &set.points, &plain)?);
        guidance_same &= reference == bits(point_errors(x, &classes, net, &sched, &set.points, &w0)?);
        let flat = DataPoint::vector(x.values.clone());
        crop_same &= reference == bits(point_errors(&flat, &classes, net, &sched, &set.points, &plain)?);
    }

    let data = gen_dataset(&fixtures::standard_gmm(), 400, 1)?;
    let model = data.model.clone().expect("gmm data has a model");
    let accuracy = |noise| -> Result<f64> {
        let mut cfg = BenchmarkConfig::naive(TimestepStrategy::UniformRandom, 100);
        cfg.options.noise = noise;
        Ok(run_benchmark(&data, &model, &sched, &cfg, 4)?.accuracy)
    };
    let zero = accuracy(NoiseVariant::Zero)?;
    let normal = accuracy(NoiseVariant::StandardNormal)?;
    Ok((
        guidance_same && crop_same && zero <= normal,
        format!("w=0 identical: {guidance_same}; crop=0 identical: {crop_same}; zero-noise acc {zero:.4} <= standard-normal {normal:.4}"),
    ))
}

fn winoground_table() -> Outcome {
    let tabled = [[[2.0, 1.0], [1.0, 2.0]], [[1.0, 2.0], [2.0, 1.0]], [[1.0, 1.0], [1.0, 2.0]]];
    let scores = tabled
        .iter()
        .map(|s| Ok(winoground_text_score(&[ScoreMatrix::new(*s)?])))
        .collect::<Result<Vec<f64>>>()?;
    Ok((scores == [1.0, 0.0, 0.0], format!("scores {scores:?} (expected [1.0, 0.0, 0.0])")))
}

fn oracle_closed_form() -> Outcome {
    let sched = sched();
    let data = gen_dataset(&fixtures::standard_gmm(), 1, 1)?;
    let model = data.model.clone().expect("gmm data has a model");
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 10_000;
    let mut worst: f64 = 0.0;
    for pair in 0..20u64 {
        let x: Vec<f64> = (0..8).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let t = rng.random_range(1..=1000);
        let class = rng.random_range(0..4);
        let expected = analytic_expected_error(&model, class, &x, t, &sched, LossKind::SquaredL2)?;
        let set = make_sample_set(&TimestepStrategy::FixedSingle { t }, NoiseVariant::StandardNormal, n, 1000, 8, pair)?;
        let errors = point_errors(&DataPoint::vector(x), &[class], &model, &sched, &set.points, &ClassifierOptions::default())?;
        let e = &errors[0];
        let mean = e.iter().sum::<f64>() / n as f64;
        let var = e.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        worst = worst.max((mean - expected).abs() / (var / n as f64).sqrt());
    }
    Ok((worst <= 3.0, format!("largest deviation {worst:.2} standard errors over 20 pairs (<= 3)")))
}

fn gradcheck() -> Outcome {
    let sched = sched();
    let config = MlpConfig {
        dim: 5,
        num_classes: 3,
        hidden: vec![12, 12],
        embed_dim: 8,
        unconditional: true,
        activation: Default::default(),
        zero_init_output: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let net = MlpDenoiser::new(config, &mut rng)?;
    let x0: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
    let eps: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
    let example = TrainingExample { x0: &x0, t: 400, eps: &eps, class: Some(2) };
    let report = finite_diff_gradcheck(&net, &example, &sched, 1e-4, 1e-3)?;
    Ok((
        report.max_relative_deviation < 1e-3,
        format!("{} parameters, max relative deviation {:.2e} (< 1e-3)", report.num_params, report.max_relative_deviation),
    ))
}

fn pruning() -> Outcome {
    let sched = sched();
    let data = gen_dataset(&fixtures::many_class_gmm(), 10, 1)?;
    let model = data.model.clone().expect("gmm data has a model");
    let base = run_benchmark(&data, &model, &sched, &BenchmarkConfig::naive(TimestepStrategy::UniformRandom, 64), 5)?;
    let mut cfg = BenchmarkConfig::naive(TimestepStrategy::UniformRandom, 64);
    cfg.prune = Some(PrunerConfig { k: 5, label_noise: 0.2 });
    let pruned = run_benchmark(&data, &model, &sched, &cfg, 5)?;
    let saved = 1.0 - pruned.evaluations as f64 / base.evaluations as f64;
    let drop = base.accuracy - pruned.accuracy;
    Ok((
        saved >= 0.5 && drop < 0.02,
        format!(
            "{} -> {} evaluations ({:.1}% fewer, >= 50%); accuracy {:.4} -> {:.4} (drop < 0.02)",
            base.evaluations,
            pruned.evaluations,
            100.0 * saved,
            base.accuracy,
            pruned.accuracy
        ),
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut ok = true;
    ok &= check("bayes_agreement", secs(60), bayes_agreement);
    ok &= check("paired_variance_reduction", secs(60), paired_variance);
    ok &= check("adaptive_full_keep_equals_naive", secs(10), adaptive_equivalence);
    let training = Instant::now();
    let templates = train_templates();
    let trained = training.elapsed();
    println!("trained template denoiser [{:.1}s]", trained.as_secs_f64());
    match &templates {
        Ok(t) => {
            ok &= check("timestep_accuracy_shape", secs(600).saturating_sub(trained), || timestep_shape(t));
            ok &= check("guidance_crop_noise_exactness", secs(600), || exactness(t));
            ok &= check("pure_noise_near_chance", secs(60), || pure_noise_near_chance(t));
        }
        Err(e) => {
            println!("FAIL timestep_accuracy_shape: training failed: {e}");
            println!("FAIL guidance_crop_noise_exactness: training failed: {e}");
            println!("FAIL pure_noise_near_chance: training failed: {e}");
            ok = false;
        }
    }
    ok &= check("scaling_direction", secs(600), scaling_direction);
    ok &= check("winoground_text_score_table", secs(1), winoground_table);
    ok &= check("oracle_closed_form", secs(60), oracle_closed_form);
    ok &= check("gradient_check", secs(60), gradcheck);
    ok &= check("oracle_pruning", secs(600), pruning);
    println!("acceptance: {} [{:.1}s]", if ok { "all passed" } else { "FAILURES" }, start.elapsed().as_secs_f64());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
