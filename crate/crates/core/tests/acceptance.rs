//! Acceptance criteria, one test each. Every test prints a single
//! `PASS`/`FAIL` line with the measured values before asserting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use placenta_sr::data::{
    augment, bicubic_resample, decode_byte, encode_byte, sample_1d, split, synth_generate,
    Dataset, ImageRGB8, PairedSample,
};
use placenta_sr::model::{backward, forward, infer, ModelWeights, UNetConfig};
use placenta_sr::tensor::gradcheck::{check_gradient, GradReport};
use placenta_sr::tensor::{
    bce_loss, conv2d_backward, conv2d_forward, elu, elu_backward, maxpool2x2_backward,
    maxpool2x2_forward, sigmoid, sigmoid_backward, upsample2x_backward, upsample2x_forward,
    he_normal_init, he_std, ConvKernel, Shape, Tensor,
};
use placenta_sr::train::{early_stop_check, evaluate_rmse, train, NoChangePredictor, TrainConfig};
use placenta_sr::{cli, Rng};

const FD_STEP: f64 = 1e-3;
const MODEL_TOLERANCE: f64 = 1e-3;
const OP_TOLERANCE: f64 = 1e-4;

fn verdict(name: &str, ok: bool, detail: &str) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn uniform(shape: Shape, lo: f64, hi: f64, rng: &mut Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.uniform_in(lo, hi))
}

/// Values at least `margin` away from zero, so a finite-difference step never
/// crosses the ELU kink.
fn away_from_zero(shape: Shape, margin: f64, rng: &mut Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let v = rng.uniform_in(margin, 2.0);
        if rng.coin() { v } else { -v }
    })
}

/// Dot product with fixed random weights turns an op into a scalar objective.
fn projection(shape: Shape, rng: &mut Rng) -> Tensor<f64> {
    uniform(shape, -1.0, 1.0, rng)
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn op_check(
    analytic: &[f64],
    point: &[f64],
    mut f: impl FnMut(&[f64]) -> placenta_sr::Result<f64>,
) -> GradReport {
    check_gradient(point, FD_STEP, analytic, |x| f(x).map(Some)).unwrap()
}

fn model_check(levels: usize, base: usize, size: usize, seed: u64) -> GradReport {
    let w = ModelWeights::<f64>::build(UNetConfig::toy(levels, base, size), seed).unwrap();
    let mut rng = Rng::new(seed + 100);
    let x = uniform(Shape::new(1, size, size, 3), 0.0, 1.0, &mut rng);
    let t = uniform(Shape::new(1, size, size, 3), 0.0, 1.0, &mut rng);
    let (y, cache) = forward(&w, &x).unwrap();
    let (_, dy) = bce_loss(&y, &t).unwrap();
    let grads = backward(&w, &cache, &dy).unwrap();
    let analytic: Vec<f64> = grads
        .iter()
        .flat_map(|g| g.weights.iter().chain(&g.bias).copied())
        .collect();
    let mut probe = w.clone();
    check_gradient(&w.flat_params(), FD_STEP, &analytic, |p| {
        probe.set_flat_params(p)?;
        let (y, c) = forward(&probe, &x)?;
        // Skip steps that cross an ELU or max-pool kink.
        if !c.same_branches(&cache) {
            return Ok(None);
        }
        Ok(Some(bce_loss(&y, &t)?.0))
    })
    .unwrap()
}

#[test]
fn gradient_fidelity() {
    let started = Instant::now();
    let mut rng = Rng::new(2022);
    let mut worst_op = Vec::new();

    // conv: gradient with respect to input and kernel.
    let shape = Shape::new(2, 6, 5, 3);
    let x = uniform(shape, -1.0, 1.0, &mut rng);
    let kernel = ConvKernel::from_parts(
        (3, 3, 3, 4),
        (0..108).map(|_| rng.uniform_in(-0.5, 0.5)).collect(),
        (0..4).map(|_| rng.uniform_in(-0.5, 0.5)).collect(),
    )
    .unwrap();
    let proj = projection(Shape::new(2, 6, 5, 4), &mut rng);
    let g = conv2d_backward(&x, &kernel, &proj).unwrap();
    let r = op_check(g.d_input.data(), x.data(), |p| {
        Ok(dot(&conv2d_forward(&Tensor::from_vec(shape, p.to_vec())?, &kernel)?, &proj))
    });
    worst_op.push(("conv input", r));
    let params: Vec<f64> = kernel.weights.iter().chain(&kernel.bias).copied().collect();
    let analytic: Vec<f64> = g.d_kernel.weights.iter().chain(&g.d_kernel.bias).copied().collect();
    let r = op_check(&analytic, &params, |p| {
        let k = ConvKernel::from_parts((3, 3, 3, 4), p[..108].to_vec(), p[108..].to_vec())?;
        Ok(dot(&conv2d_forward(&x, &k)?, &proj))
    });
    worst_op.push(("conv kernel", r));

    // max-pool: distinct values spaced 0.1 apart keep every winner stable.
    let shape = Shape::new(1, 4, 6, 2);
    let mut values: Vec<f64> = (0..shape.len()).map(|i| i as f64 * 0.1).collect();
    rng.shuffle(&mut values);
    let x = Tensor::from_vec(shape, values).unwrap();
    let (y, idx) = maxpool2x2_forward(&x).unwrap();
    let proj = projection(y.shape(), &mut rng);
    let analytic = maxpool2x2_backward(&idx, &proj).unwrap();
    let r = op_check(analytic.data(), x.data(), |p| {
        Ok(dot(&maxpool2x2_forward(&Tensor::from_vec(shape, p.to_vec())?)?.0, &proj))
    });
    worst_op.push(("max-pool", r));

    // nearest upsampling.
    let shape = Shape::new(1, 3, 4, 2);
    let x = uniform(shape, -1.0, 1.0, &mut rng);
    let proj = projection(Shape::new(1, 6, 8, 2), &mut rng);
    let analytic = upsample2x_backward(&proj).unwrap();
    let r = op_check(analytic.data(), x.data(), |p| {
        Ok(dot(&upsample2x_forward(&Tensor::from_vec(shape, p.to_vec())?), &proj))
    });
    worst_op.push(("upsample", r));

    // ELU, inputs at least 0.05 from the kink.
    let shape = Shape::new(1, 4, 4, 3);
    let x = away_from_zero(shape, 0.05, &mut rng);
    let proj = projection(shape, &mut rng);
    let analytic = elu_backward(&x, &proj).unwrap();
    let r = op_check(analytic.data(), x.data(), |p| {
        Ok(dot(&elu(&Tensor::from_vec(shape, p.to_vec())?), &proj))
    });
    worst_op.push(("elu", r));

    // sigmoid.
    let x = uniform(shape, -4.0, 4.0, &mut rng);
    let proj = projection(shape, &mut rng);
    let analytic = sigmoid_backward(&sigmoid(&x), &proj).unwrap();
    let r = op_check(analytic.data(), x.data(), |p| {
        Ok(dot(&sigmoid(&Tensor::from_vec(shape, p.to_vec())?), &proj))
    });
    worst_op.push(("sigmoid", r));

    // BCE, targets kept 0.1 away from the per-element minimum p == t.
    let p = uniform(shape, 0.15, 0.85, &mut rng);
    let t = Tensor::from_fn(shape, |i| {
        let gap = rng.uniform_in(0.1, 0.15);
        let v = p.data()[i];
        if v < 0.5 { v + gap } else { v - gap }
    });
    let (_, analytic) = bce_loss(&p, &t).unwrap();
    let r = op_check(analytic.data(), p.data(), |x| {
        Ok(bce_loss(&Tensor::from_vec(shape, x.to_vec())?, &t)?.0)
    });
    worst_op.push(("bce", r));

    let mut models = Vec::new();
    for (levels, base, size, seed) in [(0, 4, 8, 1), (1, 2, 8, 2), (1, 4, 16, 3), (2, 2, 16, 4), (2, 4, 16, 5)] {
        models.push((format!("levels {levels} base {base} {size}x{size}"), model_check(levels, base, size, seed)));
    }

    let ops_ok = worst_op.iter().all(|(_, r)| r.within(OP_TOLERANCE));
    let models_ok = models.iter().all(|(_, r)| r.within(MODEL_TOLERANCE));
    let elapsed = started.elapsed().as_secs_f64();
    for (name, r) in &worst_op {
        println!("  op {name}: max rel err {:.3e} over {} coords", r.max_rel_error, r.checked);
    }
    for (name, r) in &models {
        println!(
            "  model {name}: max rel err {:.3e} over {} params ({} skipped at kinks)",
            r.max_rel_error, r.checked, r.skipped
        );
    }
    let op_max = worst_op.iter().map(|(_, r)| r.max_rel_error).fold(0.0, f64::max);
    let model_max = models.iter().map(|(_, r)| r.max_rel_error).fold(0.0, f64::max);
    let ok = ops_ok && models_ok && elapsed < 120.0;
    verdict(
        "gradient fidelity",
        ok,
        &format!("ops max {op_max:.3e} (need < 1e-4), models max {model_max:.3e} (need < 1e-3), {elapsed:.1}s (need < 120s)"),
    );
    assert!(ok);
}

#[test]
fn residual_codec_exhaustive() {
    let started = Instant::now();
    let (mut lossless, mut lossy, mut wrong) = (0usize, 0usize, 0usize);
    for hr in 0..=255u8 {
        for lr in 0..=255u8 {
            let d = hr as i32 - lr as i32;
            let back = decode_byte(lr, encode_byte(hr, lr)) as i32;
            if (-127..=128).contains(&d) {
                lossless += 1;
                wrong += usize::from(back != hr as i32);
            } else {
                lossy += 1;
                // Saturated residuals decode to lr + 128 or lr - 127.
                let expected = if d > 128 { lr as i32 + 128 } else { lr as i32 - 127 };
                wrong += usize::from(back != expected || back == hr as i32);
            }
        }
    }
    let expected_lossy = 127 * 128 / 2 + 128 * 129 / 2;
    let elapsed = started.elapsed().as_secs_f64();
    let ok = wrong == 0 && lossy == expected_lossy && lossless + lossy == 65536 && elapsed < 1.0;
    verdict(
        "residual codec",
        ok,
        &format!("{lossless} lossless pairs, {lossy} clamp-loss pairs (expected {expected_lossy}), {wrong} mismatches, {elapsed:.3}s"),
    );
    assert!(ok);
}

#[test]
fn bicubic_exactness() {
    let started = Instant::now();
    let mut rng = Rng::new(5);
    let mut identity_diffs = 0usize;
    for _ in 0..20 {
        let (w, h) = (1 + rng.below(40), 1 + rng.below(40));
        let img = ImageRGB8::from_fn(w, h, |_, _| [rng.below(256) as u8, rng.below(256) as u8, rng.below(256) as u8]);
        let out = bicubic_resample(&img, w, h).unwrap();
        identity_diffs += out.pixels().iter().zip(img.pixels()).filter(|(a, b)| a != b).count();
    }
    let mut constant_diffs = 0usize;
    for _ in 0..20 {
        let rgb = [rng.below(256) as u8, rng.below(256) as u8, rng.below(256) as u8];
        let img = ImageRGB8::filled(1 + rng.below(30), 1 + rng.below(30), rgb);
        let out = bicubic_resample(&img, 1 + rng.below(50), 1 + rng.below(50)).unwrap();
        constant_diffs += out.pixels().chunks(3).filter(|p| *p != rgb).count();
    }
    let ramp = sample_1d(&[0.0, 100.0, 200.0, 300.0], 1.5);
    let row = ImageRGB8::from_fn(4, 1, |x, _| [(x * 60) as u8, 0, 0]);
    let shrunk = bicubic_resample(&row, 1, 1).unwrap().get(0, 0)[0];
    let elapsed = started.elapsed().as_secs_f64();
    let ok = identity_diffs == 0
        && constant_diffs == 0
        && (ramp - 150.0).abs() <= 0.5
        && shrunk == 90
        && elapsed < 5.0;
    verdict(
        "bicubic exactness",
        ok,
        &format!("identity diffs {identity_diffs}, constant diffs {constant_diffs}, ramp(1.5) = {ramp}, 4->1 ramp pixel {shrunk}, {elapsed:.2}s"),
    );
    assert!(ok);
}

#[test]
fn architecture_contract() {
    let started = Instant::now();
    let config = UNetConfig::default();
    let specs = config.layer_specs();
    let out_channels = |name: &str| specs.iter().find(|s| s.name == name).map(|s| s.shape[3]);
    let encoder: Vec<Option<usize>> = (0..4).map(|k| out_channels(&format!("enc{k}_conv2"))).collect();
    let bottleneck = out_channels("bottleneck_conv2");

    let mut weights = ModelWeights::<f32>::build(config, 2022).unwrap();
    let mut rng = Rng::new(1);
    let x = Tensor::<f32>::from_fn(Shape::new(1, 512, 512, 3), |_| rng.uniform() as f32);
    let y = infer(&weights, &x).unwrap();
    weights.set_constant_output(0.0);
    let half = infer(&weights, &x).unwrap();
    let non_half = half.data().iter().filter(|&&v| v != 0.5).count();
    let elapsed = started.elapsed().as_secs_f64();

    let ok = encoder == [Some(16), Some(32), Some(64), Some(128)]
        && bottleneck == Some(256)
        && y.shape() == Shape::new(1, 512, 512, 3)
        && non_half == 0
        && elapsed < 30.0;
    verdict(
        "architecture contract",
        ok,
        &format!("output {}, encoder {encoder:?}, bottleneck {bottleneck:?}, {non_half} outputs != 0.5, {elapsed:.1}s", y.shape()),
    );
    assert!(ok);
}

fn toy_dataset(seed: u64) -> Dataset {
    let sources = synth_generate(8, 256, 256, seed);
    let root = Rng::new(seed);
    let patches = augment(&sources, 200, 64, &mut root.fork(1)).unwrap();
    let samples: Vec<PairedSample> = patches
        .into_iter()
        .map(|p| PairedSample::from_hr(p, 2).unwrap())
        .collect();
    let s = split(200, 160, 40, &mut root.fork(2)).unwrap();
    Dataset::split_samples(samples, &s)
}

/// Mean binary entropy of the residual targets: no prediction can push the
/// mean BCE below it.
fn target_entropy(samples: &[PairedSample]) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for s in samples {
        for &b in s.residual.pixels() {
            let t = b as f64 / 255.0;
            let h = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
            total += h(t) + h(1.0 - t);
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn learning_signal() {
    let started = Instant::now();
    let data = toy_dataset(7);
    let weights = ModelWeights::build(UNetConfig::toy(2, 8, 64), 7).unwrap();
    let config = TrainConfig {
        max_epochs: 50,
        seed: 7,
        eval_every: 0,
        ..TrainConfig::default()
    };
    let outcome = train(&config, weights, &data, &mut ()).unwrap();
    let first = outcome.history.first().unwrap().loss;
    let last = outcome.history.last().unwrap().loss;
    let ratio = last / first;
    let report = evaluate_rmse(&outcome.last, &data.test).unwrap();
    let floor = target_entropy(&data.train);
    let elapsed = started.elapsed().as_secs_f64();

    let a = ratio < 0.7;
    let b = report.reconstruction < report.baseline;
    verdict(
        "learning signal (a) loss ratio",
        a,
        &format!(
            "final/first mean BCE = {last:.6}/{first:.6} = {ratio:.4} (need < 0.7; target entropy floor {floor:.6})"
        ),
    );
    verdict(
        "learning signal (b) beats baseline",
        b,
        &format!(
            "test rMSE {:.7} vs all-127 baseline {:.7}, {} epochs, {elapsed:.0}s",
            report.reconstruction,
            report.baseline,
            outcome.history.len()
        ),
    );
    assert!(elapsed < 900.0, "took {elapsed:.0}s");
    assert!(a && b);
}

#[test]
fn baseline_identity() {
    let started = Instant::now();
    let samples: Vec<PairedSample> = synth_generate(6, 96, 64, 3)
        .into_iter()
        .map(|hr| PairedSample::from_hr(hr, 2).unwrap())
        .collect();
    let report = evaluate_rmse(&NoChangePredictor, &samples).unwrap();
    // Exact integer sums; the 1/255^2 scaling cancels in the ratio.
    let (mut num, mut den) = (0u64, 0u64);
    for s in &samples {
        for (&l, &h) in s.lr.pixels().iter().zip(s.hr.pixels()) {
            num += (l as i64 - h as i64).pow(2) as u64;
            den += (h as u64).pow(2);
        }
    }
    let oracle = num as f64 / den as f64;
    let diff = (report.reconstruction - oracle).abs();
    let elapsed = started.elapsed().as_secs_f64();
    let ok = diff <= 1e-12 && elapsed < 10.0;
    verdict(
        "baseline identity",
        ok,
        &format!("evaluator {:.15} vs oracle {oracle:.15}, |diff| {diff:.2e} <= 1e-12", report.reconstruction),
    );
    assert!(ok);
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn pipeline_run(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let p = |sub: &str| root.join(sub).to_string_lossy().into_owned();
    let run = |args: &[&str]| {
        let mut full = vec!["placenta-sr"];
        full.extend_from_slice(args);
        cli::run_from(full).unwrap();
    };
    run(&["synth", "--count", "3", "--width", "96", "--height", "80", "--seed", "11", "--out-dir", &p("src")]);
    run(&[
        "build-dataset", "--src-dir", &p("src"), "--count", "8", "--patch", "32", "--train", "6",
        "--test", "2", "--seed", "12", "--out-dir", &p("dataset"),
    ]);
    run(&[
        "train", "--manifest", &p("dataset/manifest.json"), "--levels", "2", "--base-channels", "4",
        "--epochs", "3", "--eval-every", "1", "--checkpoint-every", "1", "--seed", "13", "--out", &p("run"),
    ]);
    let mut files = snapshot(&root.join("dataset"));
    for (k, v) in snapshot(&root.join("run")) {
        files.insert(format!("run/{k}"), v);
    }
    files
}

#[test]
fn determinism() {
    let started = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pipeline_run(a.path());
    let second = pipeline_run(b.path());
    let differing: Vec<&String> = first
        .keys()
        .filter(|k| second.get(*k) != first.get(*k))
        .collect();
    let required = ["manifest.json", "run/weights.psrw", "run/metrics.csv", "hr/0000.png"];
    let missing: Vec<&&str> = required
        .iter()
        .filter(|f| !first.contains_key(**f) && !first.keys().any(|k| k.ends_with(**f)))
        .collect();
    let ok = differing.is_empty() && first.len() == second.len() && missing.is_empty();
    verdict(
        "determinism",
        ok,
        &format!(
            "{} files compared, {} differ, missing {missing:?}, {:.1}s",
            first.len(),
            differing.len(),
            started.elapsed().as_secs_f64()
        ),
    );
    assert!(ok, "differing: {differing:?}");
}

#[test]
fn he_init_statistics() {
    let draws = 10_000;
    // 3x3x16 kernel: fan_in 144; 70 outputs give 10,080 weights.
    let k: ConvKernel<f64> = he_normal_init((3, 3, 16, 70), &mut Rng::new(2024)).unwrap();
    let w = &k.weights[..draws];
    let n = draws as f64;
    let mean = w.iter().sum::<f64>() / n;
    let std = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let expected = 0.11785;
    let std_ok = ((std - expected) / expected).abs() < 0.05;
    let mean_ok = mean.abs() < 3.0 * std / n.sqrt();
    let ok = std_ok && mean_ok && (he_std(144) - expected).abs() < 1e-5;
    verdict(
        "he_init_statistics",
        ok,
        &format!("std {std:.5} (target {expected}), mean {mean:.2e}, 3 s.e. {:.2e}", 3.0 * std / n.sqrt()),
    );
    assert!(ok);
}

#[test]
fn early_stopping() {
    let patience = 100;
    let first_stop = |history: &[f64]| {
        (1..=history.len()).find(|&end| early_stop_check(&history[..end], patience, 0.0))
    };
    let constant = vec![0.5; 400];
    let improving: Vec<f64> = (0..900).map(|i| 1.0 - i as f64 * 1e-3).collect();
    let c = first_stop(&constant);
    let i = first_stop(&improving);
    // The first epoch sets the best; 100 stale epochs later is epoch 101.
    let ok = c == Some(patience + 1) && i.is_none();
    verdict(
        "early_stopping",
        ok,
        &format!("constant history stops at epoch {c:?}, improving history stops at {i:?}"),
    );
    assert!(ok);
}
