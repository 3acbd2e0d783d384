use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use deepcs::bcs_spl::{
    ar1_autocorrelation, block_sample, make_gaussian_matrix, mmse_initial, mmse_matrix, spl_reconstruct,
    MeasurementMatrix, ReconstructionMatrix, SplIteration,
};
use deepcs::csnet::{
    build_model, deep_reconstruct, initial_reconstruct, load_model, sample, save_model, train_with_progress,
    write_loss_history, CsNetModel,
};
use deepcs::datapipe::{
    crop, extract_patches, list_images, load_image, pad_to_block_multiple, save_image, write_synthetic_corpus,
    ImageRecord,
};
use deepcs::metrics::{aggregate, psnr, ssim, time_op, write_aggregates_csv, write_records_csv, EvalRecord};
use deepcs::netcore::{seeded_rng, Real};
use deepcs::Tensor;

use crate::config::{Precision, RunConfig, Stage};
use crate::Failure;

type Outcome = Result<(), Failure>;

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    value
        .as_deref()
        .ok_or_else(|| Failure::Config(format!("{flag} is required")))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(Failure::Config(msg()))
    }
}

fn validate_sampling(cfg: &RunConfig) -> Outcome {
    check(cfg.ratio > 0.0 && cfg.ratio <= 1.0, || {
        format!("--ratio must lie in (0, 1], got {}", cfg.ratio)
    })?;
    check(cfg.block >= 2, || format!("--block must be at least 2, got {}", cfg.block))?;
    check(cfg.csnet().measurements() >= 1, || {
        format!("--ratio {} leaves no measurements for --block {}", cfg.ratio, cfg.block)
    })
}

fn validate_network(cfg: &RunConfig) -> Outcome {
    validate_sampling(cfg)?;
    check(cfg.depth >= 1, || "--depth must be at least 1".into())?;
    check(cfg.width >= 1, || "--width must be at least 1".into())?;
    check(cfg.filter % 2 == 1, || format!("--filter must be odd, got {}", cfg.filter))
}

fn validate_spl(cfg: &RunConfig) -> Outcome {
    check((0.0..1.0).contains(&cfg.rho), || format!("--rho must lie in [0, 1), got {}", cfg.rho))?;
    cfg.spl()
        .validate()
        .map_err(|e| Failure::Config(format!("SPL settings (--gamma, --tau0-fraction, --tau-decay, --max-iters, --rel-tol, --wiener-window): {e}")))
}

/// A single image file or every image in a directory.
fn load_inputs(path: &Path) -> Result<Vec<ImageRecord>, Failure> {
    let files = if path.is_dir() {
        list_images(path)?
    } else if path.exists() {
        vec![path.to_path_buf()]
    } else {
        return Err(Failure::Io(format!("{}: no such file or directory", path.display())));
    };
    if files.is_empty() {
        return Err(Failure::Config(format!(
            "--images: no .pgm or .png files in {}",
            path.display()
        )));
    }
    Ok(files.iter().map(|p| load_image(p)).collect::<Result<_, _>>()?)
}

fn create_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// Metrics on the 8-bit image that is actually written out.
fn score(algorithm: &str, image: &ImageRecord, ratio: f64, output: &Tensor<f64>, seconds: f64) -> Result<EvalRecord, Failure> {
    let delivered = output.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0);
    Ok(EvalRecord {
        algorithm: algorithm.into(),
        image: image.name.clone(),
        ratio,
        psnr_db: psnr(&image.pixels, &delivered, 1.0)?,
        ssim: ssim(&image.pixels, &delivered)?,
        seconds,
    })
}

fn write_records(dir: &Path, records: &[EvalRecord]) -> Outcome {
    let path = dir.join("records.csv");
    let mut f = create_file(&path)?;
    write_records_csv(records, &mut f)?;
    f.flush().map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub fn train(cfg: &RunConfig) -> Outcome {
    validate_network(cfg)?;
    let images = required(&cfg.images, "--images")?;
    let out = required(&cfg.out, "--out")?;
    cfg.schedule()
        .validate()
        .map_err(|e| Failure::Config(format!("--epochs/--lr-stages: {e}")))?;
    check(cfg.iterations >= 1 && cfg.batch >= 1, || "--iterations and --batch must be positive".into())?;
    check(cfg.patch >= cfg.block && cfg.patch % cfg.block == 0, || {
        format!("--patch {} must be a positive multiple of --block {}", cfg.patch, cfg.block)
    })?;
    let count = if cfg.patches == 0 { cfg.iterations * cfg.batch } else { cfg.patches };
    check(count >= cfg.batch, || format!("--patches {count} is fewer than one --batch"))?;

    let corpus = load_inputs(images)?;
    let set = extract_patches(&corpus, cfg.patch, count, cfg.patch_seed(), cfg.augment)?;
    log::info!("training on {count} patches from {} images", corpus.len());
    let progress = |r: &deepcs::csnet::EpochRecord| {
        eprintln!("epoch {:>3}  loss {:.6e}  lr {:e}", r.epoch, r.mean_loss, r.learning_rate);
    };
    let (model, history) = match cfg.precision {
        Precision::F32 => {
            let mut m = build_model::<f32>(&cfg.csnet())?;
            let h = train_with_progress(&mut m, &set.patches, &cfg.schedule(), cfg.shuffle_seed(), progress)?;
            (m, h)
        }
        Precision::F64 => {
            let mut m = build_model::<f64>(&cfg.csnet())?;
            let h = train_with_progress(&mut m, &set.patches, &cfg.schedule(), cfg.shuffle_seed(), progress)?;
            (m.cast::<f32>(), h)
        }
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_model(&model, out)?;
    let dir = out.parent().unwrap_or(Path::new("."));
    let history_path = dir.join("loss_history.csv");
    let mut f = create_file(&history_path)?;
    write_loss_history(&history, &mut f)?;
    f.flush().map_err(|e| Failure::Io(format!("{}: {e}", history_path.display())))?;
    log::info!("wrote {} and {}", out.display(), history_path.display());
    Ok(())
}

fn load_csnet(path: &Path, cfg: &RunConfig, explicit: &BTreeSet<String>) -> Result<CsNetModel<f32>, Failure> {
    let mut model: CsNetModel<f32> = load_model(path)?;
    model.set_final_relu(cfg.final_relu);
    let b = model.config().block_size;
    if explicit.contains("block") && cfg.block != b {
        return Err(Failure::Config(format!(
            "--block {} does not match the model's block size {b}",
            cfg.block
        )));
    }
    let expected = RunConfig { block: b, ..cfg.clone() }.csnet().measurements();
    if explicit.contains("ratio") && expected != model.measurements() {
        return Err(Failure::Config(format!(
            "--ratio {} does not match the model's {} measurements per block",
            cfg.ratio,
            model.measurements()
        )));
    }
    Ok(model)
}

/// Runs the requested stages on a padded copy of `image`; outputs are
/// cropped back to the original size.
fn run_csnet<T: Real>(model: &CsNetModel<T>, image: &ImageRecord, stage: Stage) -> Result<Vec<(Stage, Tensor<f64>, f64)>, Failure> {
    let (padded, (h, w)) = pad_to_block_multiple(&image.pixels, model.config().block_size)?;
    let x: Tensor<T> = padded.cast();
    let mut out = Vec::new();
    let (initial, t_init) = time_op(|| sample(model, &x).and_then(|y| initial_reconstruct(model, &y)));
    let initial = initial?;
    if stage != Stage::Final {
        out.push((Stage::Initial, crop(&initial.cast(), h, w)?, t_init));
    }
    if stage != Stage::Initial {
        let (fin, t_deep) = time_op(|| deep_reconstruct(model, &initial));
        out.push((Stage::Final, crop(&fin?.cast(), h, w)?, t_init + t_deep));
    }
    Ok(out)
}

pub fn reconstruct(cfg: &RunConfig, explicit: &BTreeSet<String>) -> Outcome {
    let model = load_csnet(required(&cfg.model, "--model")?, cfg, explicit)?;
    let inputs = load_inputs(required(&cfg.images, "--images")?)?;
    let out = required(&cfg.out, "--out")?;
    create_dir(out)?;
    let ratio = model.config().sampling_ratio;
    let mut records = Vec::new();
    for image in &inputs {
        for (stage, img, secs) in run_csnet(&model, image, cfg.stage)? {
            let (suffix, alg) = match stage {
                Stage::Initial => ("initial", "csnet_initial"),
                _ => ("final", "csnet"),
            };
            save_image(&img, &out.join(format!("{}_{suffix}.pgm", image.name)))?;
            records.push(score(alg, image, ratio, &img, secs)?);
        }
    }
    write_records(out, &records)
}

struct Baseline {
    phi: MeasurementMatrix,
    phi_tilde: ReconstructionMatrix,
}

fn baseline_operators(cfg: &RunConfig, explicit: &BTreeSet<String>) -> Result<Baseline, Failure> {
    let phi = match &cfg.matrix {
        Some(path) => {
            let phi = MeasurementMatrix::load(path)?;
            if explicit.contains("block") && phi.block_size() != cfg.block {
                return Err(Failure::Config(format!(
                    "--block {} does not match the matrix block size {}",
                    cfg.block,
                    phi.block_size()
                )));
            }
            phi
        }
        None => {
            validate_sampling(cfg)?;
            make_gaussian_matrix(cfg.csnet().measurements(), cfg.block, &mut seeded_rng(cfg.matrix_seed()), true)?
        }
    };
    let r = ar1_autocorrelation(phi.block_size(), cfg.rho)?;
    let phi_tilde = mmse_matrix(&phi, &r)?;
    Ok(Baseline { phi, phi_tilde })
}

/// MMSE and SPL records for one image, with the SPL log.
fn run_baseline(
    ops: &Baseline,
    cfg: &RunConfig,
    image: &ImageRecord,
) -> Result<(Tensor<f64>, f64, Tensor<f64>, f64, Vec<SplIteration>), Failure> {
    let b = ops.phi.block_size();
    let (padded, (h, w)) = pad_to_block_multiple(&image.pixels, b)?;
    let y = block_sample(&padded, &ops.phi)?;
    let (initial, t_mmse) = time_op(|| mmse_initial(&y, &ops.phi_tilde));
    let r = ar1_autocorrelation(b, cfg.rho)?;
    let (spl, t_spl) = time_op(|| spl_reconstruct(&y, &ops.phi, &r, &cfg.spl()));
    let spl = spl?;
    Ok((crop(&initial?, h, w)?, t_mmse, crop(&spl.image, h, w)?, t_spl, spl.iterations))
}

fn matrix_ratio(phi: &MeasurementMatrix) -> f64 {
    phi.rows() as f64 / phi.cols() as f64
}

pub fn baseline(cfg: &RunConfig, explicit: &BTreeSet<String>) -> Outcome {
    validate_spl(cfg)?;
    let inputs = load_inputs(required(&cfg.images, "--images")?)?;
    let out = required(&cfg.out, "--out")?;
    let ops = baseline_operators(cfg, explicit)?;
    create_dir(out)?;
    let ratio = if cfg.matrix.is_some() { matrix_ratio(&ops.phi) } else { cfg.ratio };
    let mut records = Vec::new();
    let log_path = out.join("spl_log.csv");
    let mut log = csv_writer(&log_path)?;
    log.write_record(["image", "iteration", "tau", "residual", "change"])
        .map_err(|e| Failure::Io(format!("{}: {e}", log_path.display())))?;
    for image in &inputs {
        let (initial, t_mmse, spl, t_spl, iterations) = run_baseline(&ops, cfg, image)?;
        save_image(&initial, &out.join(format!("{}_mmse.pgm", image.name)))?;
        save_image(&spl, &out.join(format!("{}_spl.pgm", image.name)))?;
        records.push(score("mmse", image, ratio, &initial, t_mmse)?);
        records.push(score("spl", image, ratio, &spl, t_spl)?);
        for it in iterations {
            log.write_record([
                image.name.clone(),
                it.iteration.to_string(),
                it.tau.to_string(),
                it.residual.to_string(),
                it.change.to_string(),
            ])
            .map_err(|e| Failure::Io(format!("{}: {e}", log_path.display())))?;
        }
    }
    log.flush().map_err(|e| Failure::Io(format!("{}: {e}", log_path.display())))?;
    write_records(out, &records)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, Failure> {
    Ok(csv::Writer::from_writer(create_file(path)?))
}

pub fn eval(cfg: &RunConfig) -> Outcome {
    validate_spl(cfg)?;
    let inputs = load_inputs(required(&cfg.images, "--images")?)?;
    let out = required(&cfg.out, "--out")?;
    check(!cfg.ratios.is_empty(), || "--ratios must list at least one ratio".into())?;
    for alg in &cfg.algorithms {
        check(["csnet", "mmse", "spl"].contains(&alg.as_str()), || {
            format!("--algorithms: unknown algorithm {alg:?}; expected csnet, mmse or spl")
        })?;
    }
    let wants = |a: &str| cfg.algorithms.iter().any(|x| x == a);
    if wants("csnet") {
        required(&cfg.models, "--models")?;
    }
    create_dir(out)?;

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for &ratio in &cfg.ratios {
        let rcfg = RunConfig { ratio, ..cfg.clone() };
        validate_sampling(&rcfg)?;
        if wants("csnet") {
            let path = model_path(cfg.models.as_deref().unwrap(), ratio);
            if path.exists() {
                let model = load_csnet(&path, &rcfg, &BTreeSet::new())?;
                for image in &inputs {
                    for (_, img, secs) in run_csnet(&model, image, Stage::Final)? {
                        records.push(score("csnet", image, ratio, &img, secs)?);
                    }
                }
            } else {
                let msg = format!("csnet at ratio {ratio}: no model at {}, skipped", path.display());
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        if wants("mmse") || wants("spl") {
            let ops = baseline_operators(&rcfg, &BTreeSet::new())?;
            for image in &inputs {
                if wants("spl") {
                    let (initial, t_mmse, spl, t_spl, _) = run_baseline(&ops, &rcfg, image)?;
                    if wants("mmse") {
                        records.push(score("mmse", image, ratio, &initial, t_mmse)?);
                    }
                    records.push(score("spl", image, ratio, &spl, t_spl)?);
                } else {
                    let (padded, (h, w)) = pad_to_block_multiple(&image.pixels, ops.phi.block_size())?;
                    let y = block_sample(&padded, &ops.phi)?;
                    let (initial, t) = time_op(|| mmse_initial(&y, &ops.phi_tilde));
                    records.push(score("mmse", image, ratio, &crop(&initial?, h, w)?, t)?);
                }
            }
        }
    }

    let mut report = aggregate(&records);
    report.warnings.splice(0..0, warnings);
    write_records(out, &report.records)?;
    let path = out.join("aggregates.csv");
    let mut f = create_file(&path)?;
    write_aggregates_csv(&report.aggregates, &mut f)?;
    f.flush().map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let path = out.join("warnings.txt");
    let mut f = create_file(&path)?;
    for w in &report.warnings {
        writeln!(f, "{w}").map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    f.flush().map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// `<dir>/csnet_<ratio>.csnt`, e.g. `csnet_0.1.csnt`.
pub fn model_path(dir: &Path, ratio: f64) -> PathBuf {
    dir.join(format!("csnet_{ratio}.csnt"))
}

pub fn export_matrix(cfg: &RunConfig, explicit: &BTreeSet<String>) -> Outcome {
    let model = load_csnet(required(&cfg.model, "--model")?, cfg, explicit)?;
    let out = required(&cfg.out, "--out")?;
    model.export_sampling_matrix().save(out)?;
    Ok(())
}

pub fn synth_corpus(cfg: &RunConfig, count: usize, height: usize, width: usize) -> Outcome {
    let out = required(&cfg.out, "--out")?;
    check(count >= 1, || "--count must be at least 1".into())?;
    check(height >= 1 && width >= 1, || "--height and --width must be positive".into())?;
    write_synthetic_corpus(out, count, height, width, cfg.seed)?;
    Ok(())
}
