//! `deepcs`: train, run and compare block compressed-sensing reconstructors.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 I/O or file-format
//! failure, 4 numerical failure.

mod commands;
mod config;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "deepcs", version, about = "Block compressed sensing with learned and classical reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network on patches from an image directory.
    Train(Flags),
    /// Reconstruct images with a trained network.
    Reconstruct(Flags),
    /// Reconstruct images with MMSE and smoothed projected Landweber.
    Baseline(Flags),
    /// Sweep ratios over a test set and write per-image and aggregate reports.
    Eval(Flags),
    /// Write a model's sampling layer as a CSMX matrix.
    ExportMatrix(Flags),
    /// Generate piecewise-smooth grayscale test images.
    SynthCorpus {
        #[command(flatten)]
        flags: Flags,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// image height in pixels
        #[arg(long, default_value_t = 128)]
        rows: usize,
        /// image width in pixels
        #[arg(long, default_value_t = 128)]
        cols: usize,
    },
}

/// Every configuration key as an optional flag; see `config::KEYS`.
#[derive(Args, Default)]
struct Flags {
    /// key = value file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the effective configuration here
    #[arg(long)]
    save_config: Option<PathBuf>,
    #[arg(long)]
    block: Option<String>,
    #[arg(long)]
    ratio: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    filter: Option<String>,
    #[arg(long)]
    final_relu: Option<String>,
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    lr_stages: Option<String>,
    #[arg(long)]
    patch: Option<String>,
    #[arg(long)]
    patches: Option<String>,
    #[arg(long)]
    augment: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    tau0_fraction: Option<String>,
    #[arg(long)]
    tau_decay: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    rel_tol: Option<String>,
    #[arg(long)]
    wiener_window: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    stage: Option<String>,
    #[arg(long)]
    ratios: Option<String>,
    #[arg(long)]
    algorithms: Option<String>,
    #[arg(long)]
    images: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("block", &self.block),
            ("ratio", &self.ratio),
            ("seed", &self.seed),
            ("depth", &self.depth),
            ("width", &self.width),
            ("filter", &self.filter),
            ("final_relu", &self.final_relu),
            ("precision", &self.precision),
            ("epochs", &self.epochs),
            ("iterations", &self.iterations),
            ("batch", &self.batch),
            ("lr_stages", &self.lr_stages),
            ("patch", &self.patch),
            ("patches", &self.patches),
            ("augment", &self.augment),
            ("gamma", &self.gamma),
            ("tau0_fraction", &self.tau0_fraction),
            ("tau_decay", &self.tau_decay),
            ("max_iters", &self.max_iters),
            ("rel_tol", &self.rel_tol),
            ("wiener_window", &self.wiener_window),
            ("rho", &self.rho),
            ("stage", &self.stage),
            ("ratios", &self.ratios),
            ("algorithms", &self.algorithms),
            ("images", &self.images),
            ("model", &self.model),
            ("models", &self.models),
            ("matrix", &self.matrix),
            ("out", &self.out),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_deref().map(|v| (k, v))).collect()
    }

    /// Defaults, then the config file, then flags. Also returns the keys
    /// set explicitly by either source.
    fn resolve(&self) -> Result<(RunConfig, BTreeSet<String>), Failure> {
        let mut cfg = RunConfig::default();
        let mut explicit = BTreeSet::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            explicit = cfg
                .apply_text(&text)
                .map_err(|e| Failure::Config(format!("--config {}: {e}", path.display())))?;
        }
        for (key, value) in self.pairs() {
            cfg.set(key, value).map_err(|e| {
                let rest = e.strip_prefix(key).unwrap_or(&e);
                Failure::Config(format!("--{}{rest}", key.replace('_', "-")))
            })?;
            explicit.insert(key.to_string());
        }
        if let Some(path) = &self.save_config {
            std::fs::write(path, cfg.render()).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        }
        Ok((cfg, explicit))
    }
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Io(String),
    Numerical(String),
}

impl From<deepcs::Error> for Failure {
    fn from(e: deepcs::Error) -> Self {
        use deepcs::Error::*;
        match e {
            Dimension(_) | Geometry(_) | Config(_) => Failure::Config(e.to_string()),
            Format { .. } | Io { .. } => Failure::Io(e.to_string()),
            Numerical(_) => Failure::Numerical(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(f) => commands::train(&f.resolve()?.0),
        Command::Reconstruct(f) => {
            let (cfg, explicit) = f.resolve()?;
            commands::reconstruct(&cfg, &explicit)
        }
        Command::Baseline(f) => {
            let (cfg, explicit) = f.resolve()?;
            commands::baseline(&cfg, &explicit)
        }
        Command::Eval(f) => commands::eval(&f.resolve()?.0),
        Command::ExportMatrix(f) => {
            let (cfg, explicit) = f.resolve()?;
            commands::export_matrix(&cfg, &explicit)
        }
        Command::SynthCorpus { flags, count, rows, cols } => {
            commands::synth_corpus(&flags.resolve()?.0, count, rows, cols)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (code, kind, msg) = match failure {
                Failure::Config(m) => (2, "configuration error", m),
                Failure::Io(m) => (3, "I/O error", m),
                Failure::Numerical(m) => (4, "numerical failure", m),
            };
            eprintln!("deepcs: {kind}: {msg}");
            ExitCode::from(code)
        }
    }
}
