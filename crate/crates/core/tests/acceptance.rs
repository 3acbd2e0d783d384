//! End-to-end acceptance checks; prints one PASS/FAIL line per criterion.
//!
//! Criteria 6, 7 and 9 train the desk-scale network twice in 64-bit
//! precision (roughly an hour on one core). Set `DEEPCS_ACCEPTANCE_QUICK=1`
//! to skip those three; they are then reported as SKIP, never PASS.

use std::f64::consts::PI;
use std::time::Instant;

use deepcs::bcs_spl::{
    ar1_autocorrelation, block_sample, dct2_forward, dct2_inverse, make_gaussian_matrix, mmse_initial,
    mmse_matrix, spl_reconstruct, Autocorrelation, Dct2, SplConfig,
};
use deepcs::csnet::{
    build_model, forward, loss_and_gradients, sample, train, train_step, write_loss_history, CsNetConfig,
    CsNetModel, CsNetOptimizer, EpochRecord, TrainSchedule, DESK_PATCH,
};
use deepcs::datapipe::{epoch_rng, extract_patches, synthetic_image, ImageRecord};
use deepcs::layout::combine;
use deepcs::metrics::{psnr, read_records_csv, ssim, write_records_csv, EvalRecord};
use deepcs::netcore::{finite_diff_grad, max_relative_error, seeded_rng, uniform_tensor};
use deepcs::Tensor;
use rand::seq::index::sample as sample_indices;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cfg = CsNetConfig {
        block_size: 4,
        sampling_ratio: 0.5,
        deep_depth: 2,
        deep_width: 4,
        deep_filter: 3,
        final_relu: false,
        seed: 101,
    };
    let mut model = build_model::<f64>(&cfg).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(102);
    // nonzero biases keep every ReLU branch exercised
    for layer in &mut model.deep_layers {
        layer.bias = uniform_tensor(layer.bias.shape(), &mut rng).map(|v| 0.1 * v);
    }
    let img = uniform_tensor::<f64>(&[8, 8, 1], &mut rng).map(|v| 0.5 + 0.5 * v);
    let (_, analytic) = loss_and_gradients(&model, &img, 1).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for (k, grad) in analytic.iter().enumerate() {
        let point = model.parameters()[k].clone();
        let numeric = finite_diff_grad(
            |p: &Tensor<f64>| {
                let mut m = model.clone();
                *m.parameters_mut()[k] = p.clone();
                loss_and_gradients(&m, &img, 1).unwrap().0
            },
            &point,
            1e-6,
        );
        worst = worst.max(max_relative_error(grad, &numeric));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst < 1e-4 && secs < 60.0,
        format!("{} parameter tensors, max relative error {worst:.2e}, {secs:.1} s", analytic.len()),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0_f64;
    for trial in 0..20u64 {
        let mut rng = seeded_rng(200 + trial);
        let b = [4, 8, 16, 32][trial as usize % 4];
        let ratio = [0.1, 0.25, 0.3, 0.5, 1.0][rng.gen_range(0..5)];
        let cfg = CsNetConfig {
            block_size: b,
            sampling_ratio: ratio,
            deep_depth: 1,
            deep_width: 1,
            seed: 300 + trial,
            ..CsNetConfig::default()
        };
        let model = build_model::<f32>(&cfg).map_err(|e| e.to_string())?;
        let (h, w) = (b * rng.gen_range(1..4), b * rng.gen_range(1..4));
        let img = uniform_tensor::<f64>(&[h, w, 1], &mut rng).map(|v| 0.5 + 0.5 * v);
        let got = sample(&model, &img.cast::<f32>()).map_err(|e| e.to_string())?;
        let phi = model.export_sampling_matrix();
        // the image as the network sees it, rounded to f32
        let expected = block_sample(&img.cast::<f32>().cast::<f64>(), &phi).map_err(|e| e.to_string())?;
        if got.shape() != expected.shape() {
            return Err(format!("shape {:?} vs {:?}", got.shape(), expected.shape()));
        }
        for (a, e) in got.data().iter().zip(expected.data()) {
            worst = worst.max((*a as f64 - e).abs());
        }
    }
    ensure(worst < 1e-5, format!("20 models, max abs diff {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0_f64;
    let mut worst_transpose = 0.0_f64;
    let mut cases = 0;
    for b in [4usize, 8, 16, 32] {
        for ratio in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let nb = ((ratio * (b * b) as f64) + 1e-9).floor() as usize;
            let phi = make_gaussian_matrix(nb, b, &mut seeded_rng(400 + b as u64 * 10 + nb as u64), true)
                .map_err(|e| e.to_string())?;
            let n = b * b;
            for rho in [0.0, 0.9, 0.95] {
                let r = ar1_autocorrelation(b, rho).map_err(|e| e.to_string())?;
                let pt = mmse_matrix(&phi, &r).map_err(|e| e.to_string())?;
                // (Phi Phi~)[i][j] = sum_p Phi[i][p] Phi~[p][j]
                for i in 0..nb {
                    for j in 0..nb {
                        let v: f64 = (0..n).map(|p| phi.row(i)[p] * pt.entries()[p * nb + j]).sum();
                        let target = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((v - target).abs());
                    }
                }
                cases += 1;
            }
            let pt = mmse_matrix(&phi, &Autocorrelation::identity(b)).map_err(|e| e.to_string())?;
            for p in 0..n {
                for k in 0..nb {
                    worst_transpose = worst_transpose.max((pt.entries()[p * nb + k] - phi.row(k)[p]).abs());
                }
            }
        }
    }
    ensure(
        worst < 1e-8 && worst_transpose < 1e-10,
        format!("{cases} cases, max |Phi Phi~ - I| {worst:.2e}, max |Phi~ - Phi^T| (R = I) {worst_transpose:.2e}"),
    )
}

/// 32x32 image whose 8x8 blocks each hold `k` nonzero DCT coefficients.
fn sparse_image<R: Rng>(k: usize, rng: &mut R) -> Tensor<f64> {
    let dct = Dct2::new(8);
    let mut blocks = Vec::with_capacity(16 * 64);
    for _ in 0..16 {
        let mut coeffs = vec![0.0; 64];
        for p in sample_indices(rng, 64, k) {
            let mag: f64 = rng.gen_range(0.5..1.5);
            coeffs[p] = if rng.gen::<bool>() { mag } else { -mag };
        }
        blocks.extend(dct.inverse(&coeffs));
    }
    combine(&Tensor::new(&[4, 4, 64], blocks).unwrap(), 8).unwrap()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cfg = SplConfig {
        tau0_fraction: 0.5,
        wiener_window: 0,
        max_iters: 200,
        ..SplConfig::default()
    };
    let r = ar1_autocorrelation(8, 0.95).map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    for seed in 0..10u64 {
        let mut rng = seeded_rng(2000 + seed);
        let img = sparse_image(4, &mut rng);
        let phi = make_gaussian_matrix(32, 8, &mut rng, true).map_err(|e| e.to_string())?;
        let y = block_sample(&img, &phi).map_err(|e| e.to_string())?;
        let out = spl_reconstruct(&y, &phi, &r, &cfg).map_err(|e| e.to_string())?;
        let diff: Vec<f64> = out.image.data().iter().zip(img.data()).map(|(a, b)| a - b).collect();
        errors.push(norm(&diff) / norm(img.data()));
    }
    let hits = errors.iter().filter(|&&e| e < 1e-2).count();
    let secs = start.elapsed().as_secs_f64();
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    ensure(
        hits >= 9 && secs < 60.0,
        format!("{hits}/10 seeds below 1e-2 relative error (worst {worst:.2e}), {secs:.1} s"),
    )
}

fn criterion_5() -> Outcome {
    let (mut round, mut parseval) = (0.0_f64, 0.0_f64);
    for b in [4usize, 8, 16, 32] {
        let mut rng = seeded_rng(500 + b as u64);
        for _ in 0..5 {
            let x: Vec<f64> = (0..b * b).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c = dct2_forward(&x, b);
            let back = dct2_inverse(&c, b);
            round = round.max(x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            parseval = parseval.max((norm(&x).powi(2) - norm(&c).powi(2)).abs());
        }
    }
    // direct definition, four nested sums
    let n = 4;
    let x: Vec<f64> = {
        let mut rng = seeded_rng(555);
        (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let alpha = |k: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    let c = dct2_forward(&x, n);
    let mut direct = 0.0_f64;
    for u in 0..n {
        for v in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += x[i * n + j]
                        * (PI * (2 * i + 1) as f64 * u as f64 / (2 * n) as f64).cos()
                        * (PI * (2 * j + 1) as f64 * v as f64 / (2 * n) as f64).cos();
                }
            }
            direct = direct.max((alpha(u) * alpha(v) * s - c[u * n + v]).abs());
        }
    }
    ensure(
        round < 1e-10 && parseval < 1e-10 && direct < 1e-12,
        format!("round trip {round:.1e}, Parseval {parseval:.1e}, 4x4 vs direct {direct:.1e}"),
    )
}

/// Desk corpus, schedule and seeds shared by criteria 6, 7 and 9.
struct Desk {
    train: Vec<ImageRecord>,
    test: Vec<Tensor<f64>>,
    config: CsNetConfig,
    schedule: TrainSchedule,
    patch: usize,
}

const DESK_SEED: u64 = 0;

impl Desk {
    fn new() -> Self {
        let train = (0..50)
            .map(|k| ImageRecord::new(format!("train_{k:02}"), synthetic_image(128, 128, &mut epoch_rng(100, k))))
            .collect::<Result<_, _>>()
            .unwrap();
        let test = (0..5).map(|k| synthetic_image(128, 128, &mut epoch_rng(200, k))).collect();
        Self {
            train,
            test,
            config: CsNetConfig {
                block_size: 32,
                sampling_ratio: 0.1,
                seed: DESK_SEED + 2,
                ..CsNetConfig::default()
            },
            schedule: TrainSchedule::desk(),
            patch: DESK_PATCH,
        }
    }

    fn run(&self) -> (CsNetModel<f64>, Vec<EpochRecord>, f64) {
        let start = Instant::now();
        let count = self.schedule.iterations_per_epoch * self.schedule.batch_size;
        let set = extract_patches(&self.train, self.patch, count, DESK_SEED + 3, true).unwrap();
        let mut model = build_model::<f64>(&self.config).unwrap();
        let history = train(&mut model, &set.patches, &self.schedule, DESK_SEED + 4).unwrap();
        (model, history, start.elapsed().as_secs_f64())
    }
}

fn criterion_6(desk: &Desk, model: &CsNetModel<f64>, secs: f64) -> Outcome {
    let nb = desk.config.measurements();
    let phi = make_gaussian_matrix(nb, 32, &mut seeded_rng(DESK_SEED + 1), true).map_err(|e| e.to_string())?;
    let pt = mmse_matrix(&phi, &ar1_autocorrelation(32, 0.95).unwrap()).map_err(|e| e.to_string())?;
    let (mut net, mut base, mut improved) = (0.0, 0.0, 0);
    let mut lines = Vec::new();
    for x in &desk.test {
        let out = forward(model, x).map_err(|e| e.to_string())?;
        let mm = mmse_initial(&block_sample(x, &phi).unwrap(), &pt).unwrap();
        let (pf, pi, pm) = (
            psnr(x, &out.final_image, 1.0).unwrap(),
            psnr(x, &out.initial, 1.0).unwrap(),
            psnr(x, &mm, 1.0).unwrap(),
        );
        lines.push(format!("{pf:.2}/{pi:.2}/{pm:.2}"));
        net += pf / desk.test.len() as f64;
        base += pm / desk.test.len() as f64;
        improved += (pf >= pi) as usize;
    }
    ensure(
        net - base >= 1.0 && improved >= 4,
        format!(
            "CSNet {net:.2} dB vs MMSE {base:.2} dB (gain {:.2}); final >= initial on {improved}/5 \
             [final/initial/MMSE per image: {}]; training {secs:.0} s",
            net - base,
            lines.join(" ")
        ),
    )
}

fn criterion_7(history: &[EpochRecord]) -> Outcome {
    let (first, last) = (history[0].mean_loss, history[history.len() - 1].mean_loss);
    let cfg = CsNetConfig {
        block_size: 4,
        sampling_ratio: 0.5,
        deep_depth: 2,
        deep_width: 8,
        seed: 700,
        ..CsNetConfig::default()
    };
    let mut model = build_model::<f32>(&cfg).map_err(|e| e.to_string())?;
    let batch = Tensor::filled(&[1, 8, 8, 1], 0.6f32);
    let mut opt = CsNetOptimizer::new(&model, 0.01);
    let start = train_step(&mut model, &batch, &mut opt).map_err(|e| e.to_string())?;
    let mut end = start;
    for _ in 1..200 {
        end = train_step(&mut model, &batch, &mut opt).map_err(|e| e.to_string())?;
    }
    ensure(
        last < first && end * 100.0 <= start,
        format!(
            "desk epoch loss {first:.4} -> {last:.4}; overfit loss {start:.3e} -> {end:.3e} ({:.0}x)",
            start / end
        ),
    )
}

fn criterion_8() -> Outcome {
    let model = build_model::<f32>(&CsNetConfig::default()).map_err(|e| e.to_string())?;
    let img = synthetic_image(256, 256, &mut seeded_rng(800));
    let x = img.cast::<f32>();
    forward(&model, &x).map_err(|e| e.to_string())?; // warm-up
    let start = Instant::now();
    forward(&model, &x).map_err(|e| e.to_string())?;
    let net = start.elapsed().as_secs_f64();

    let phi = make_gaussian_matrix(model.measurements(), 32, &mut seeded_rng(801), true).unwrap();
    let y = block_sample(&img, &phi).unwrap();
    let cfg = SplConfig { max_iters: 100, rel_tol: 0.0, ..SplConfig::default() };
    let start = Instant::now();
    let out = spl_reconstruct(&y, &phi, &ar1_autocorrelation(32, 0.95).unwrap(), &cfg).map_err(|e| e.to_string())?;
    let spl = start.elapsed().as_secs_f64();
    ensure(
        net < 2.0 && spl >= 10.0 * net && out.iterations.len() == 100,
        format!("CSNet {net:.3} s, SPL x{} {spl:.2} s ({:.1}x)", out.iterations.len(), spl / net),
    )
}

fn criterion_9(first: &[EpochRecord], second: &[EpochRecord]) -> Outcome {
    let csv = |h: &[EpochRecord]| {
        let mut buf = Vec::new();
        write_loss_history(h, &mut buf).unwrap();
        buf
    };
    let (a, b) = (csv(first), csv(second));
    ensure(a == b, format!("{} epochs, loss-history CSV {} bytes, identical: {}", first.len(), a.len(), a == b))
}

fn criterion_10() -> Outcome {
    let x = uniform_tensor::<f64>(&[64, 64, 1], &mut seeded_rng(1000)).map(|v| 0.45 + 0.45 * v);
    let noisy = x.map(|v| v + 0.1);
    let p = psnr(&x, &noisy, 1.0).map_err(|e| e.to_string())?;
    let s = ssim(&x, &x).map_err(|e| e.to_string())?;

    let records = vec![
        EvalRecord {
            algorithm: "csnet".into(),
            image: "a".into(),
            ratio: 0.1,
            psnr_db: 31.25,
            ssim: 0.9,
            seconds: 0.01,
        },
        EvalRecord {
            algorithm: "spl".into(),
            image: "b, quoted".into(),
            ratio: 1.0,
            psnr_db: f64::INFINITY,
            ssim: 1.0,
            seconds: 2.5,
        },
    ];
    let mut buf = Vec::new();
    write_records_csv(&records, &mut buf).map_err(|e| e.to_string())?;
    let header_ok = buf.starts_with(b"algorithm,image,ratio,psnr_db,ssim,seconds\n");
    let back = read_records_csv(&buf[..]).map_err(|e| e.to_string())?;
    ensure(
        (p - 20.0).abs() <= 0.01 && s == 1.0 && header_ok && back == records,
        format!("PSNR {p:.4} dB, SSIM(x,x) = {s}, CSV round trip {}", header_ok && back == records),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize, outcome: Outcome| {
        match &outcome {
            Ok(detail) => println!("criterion {n:>2}: PASS  {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {n:>2}: FAIL  {detail}");
            }
        }
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());

    let quick = std::env::var_os("DEEPCS_ACCEPTANCE_QUICK").is_some_and(|v| v != "0");
    if quick {
        for n in [6, 7, 9] {
            println!("criterion {n:>2}: SKIP  DEEPCS_ACCEPTANCE_QUICK is set");
        }
        report(8, criterion_8());
        report(10, criterion_10());
    } else {
        let desk = Desk::new();
        let (model, history, secs) = desk.run();
        report(6, criterion_6(&desk, &model, secs));
        report(7, criterion_7(&history));
        report(8, criterion_8());
        let (_, repeat, _) = desk.run();
        report(9, criterion_9(&history, &repeat));
        report(10, criterion_10());
    }

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
