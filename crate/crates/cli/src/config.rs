//! Run configuration shared by every command.
//!
//! A configuration renders to `key = value` lines and parses back to the
//! same value. Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use deepcs::bcs_spl::SplConfig;
use deepcs::csnet::{CsNetConfig, LrStage, TrainSchedule, DESK_PATCH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Initial,
    Final,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub block: usize,
    pub ratio: f64,
    pub seed: u64,
    pub depth: usize,
    pub width: usize,
    pub filter: usize,
    pub final_relu: bool,
    pub precision: Precision,

    pub epochs: usize,
    pub iterations: usize,
    pub batch: usize,
    pub lr_stages: Vec<LrStage>,
    pub patch: usize,
    /// 0 means `iterations * batch`.
    pub patches: usize,
    pub augment: bool,

    pub gamma: f64,
    pub tau0_fraction: f64,
    pub tau_decay: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub wiener_window: usize,
    pub rho: f64,

    pub stage: Stage,
    pub ratios: Vec<f64>,
    pub algorithms: Vec<String>,

    pub images: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spl = SplConfig::default();
        let net = CsNetConfig::default();
        let desk = TrainSchedule::desk();
        Self {
            block: net.block_size,
            ratio: net.sampling_ratio,
            seed: 0,
            depth: net.deep_depth,
            width: net.deep_width,
            filter: net.deep_filter,
            final_relu: net.final_relu,
            precision: Precision::F32,
            epochs: desk.epochs,
            iterations: desk.iterations_per_epoch,
            batch: desk.batch_size,
            lr_stages: desk.learning_rate_stages,
            patch: DESK_PATCH,
            patches: 0,
            augment: true,
            gamma: spl.gamma,
            tau0_fraction: spl.tau0_fraction,
            tau_decay: spl.tau_decay,
            max_iters: spl.max_iters,
            rel_tol: spl.rel_tol,
            wiener_window: spl.wiener_window,
            rho: 0.95,
            stage: Stage::Both,
            ratios: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            algorithms: vec!["csnet".into(), "mmse".into(), "spl".into()],
            images: None,
            model: None,
            models: None,
            matrix: None,
            out: None,
        }
    }
}

/// Documented keys, in rendering order.
pub const KEYS: &[(&str, &str)] = &[
    ("block", "block size B (default 32)"),
    ("ratio", "sampling ratio in (0, 1] (default 0.1)"),
    ("seed", "master seed; matrix = seed+1, init = seed+2, patches = seed+3, shuffle = seed+4 (default 0)"),
    ("depth", "refinement layers m (default 5)"),
    ("width", "refinement feature maps d (default 64)"),
    ("filter", "refinement filter size f, odd (default 3)"),
    ("final_relu", "ReLU after the last refinement layer (default false)"),
    ("precision", "f32 or f64 training arithmetic (default f32)"),
    ("epochs", "training epochs (default 10)"),
    ("iterations", "batches per epoch (default 100)"),
    ("batch", "patches per batch (default 16)"),
    ("lr_stages", "first-last:rate,... covering every epoch (default 1-10:0.0005)"),
    ("patch", "training patch size, a multiple of block (default 64)"),
    ("patches", "patches to extract; 0 = iterations * batch (default 0)"),
    ("augment", "random flips and rotations of patches (default true)"),
    ("gamma", "Landweber step is 1/gamma (default 1)"),
    ("tau0_fraction", "initial threshold over the largest DCT coefficient (default 0.1)"),
    ("tau_decay", "threshold decay per iteration (default 0.95)"),
    ("max_iters", "SPL iteration cap (default 200)"),
    ("rel_tol", "SPL stops when the relative change falls below this (default 0.0001)"),
    ("wiener_window", "odd Wiener window, 0 disables smoothing (default 3)"),
    ("rho", "AR(1) correlation of the MMSE prior (default 0.95)"),
    ("stage", "initial, final or both (default both)"),
    ("ratios", "comma-separated ratios for eval (default 0.1,0.2,0.3,0.4,0.5)"),
    ("algorithms", "comma-separated subset of csnet,mmse,spl for eval (default all)"),
    ("images", "input image file or directory"),
    ("model", "CSNT model file"),
    ("models", "directory of csnet_<ratio>.csnt models for eval"),
    ("matrix", "CSMX measurement matrix file"),
    ("out", "output file or directory"),
];

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (key, _) in KEYS {
            if let Some(v) = self.get(key) {
                writeln!(s, "{key} = {v}").unwrap();
            }
        }
        s
    }

    fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        Some(match key {
            "block" => self.block.to_string(),
            "ratio" => self.ratio.to_string(),
            "seed" => self.seed.to_string(),
            "depth" => self.depth.to_string(),
            "width" => self.width.to_string(),
            "filter" => self.filter.to_string(),
            "final_relu" => self.final_relu.to_string(),
            "precision" => match self.precision {
                Precision::F32 => "f32".into(),
                Precision::F64 => "f64".into(),
            },
            "epochs" => self.epochs.to_string(),
            "iterations" => self.iterations.to_string(),
            "batch" => self.batch.to_string(),
            "lr_stages" => self
                .lr_stages
                .iter()
                .map(|s| format!("{}-{}:{}", s.first_epoch, s.last_epoch, s.rate))
                .collect::<Vec<_>>()
                .join(","),
            "patch" => self.patch.to_string(),
            "patches" => self.patches.to_string(),
            "augment" => self.augment.to_string(),
            "gamma" => self.gamma.to_string(),
            "tau0_fraction" => self.tau0_fraction.to_string(),
            "tau_decay" => self.tau_decay.to_string(),
            "max_iters" => self.max_iters.to_string(),
            "rel_tol" => self.rel_tol.to_string(),
            "wiener_window" => self.wiener_window.to_string(),
            "rho" => self.rho.to_string(),
            "stage" => match self.stage {
                Stage::Initial => "initial".into(),
                Stage::Final => "final".into(),
                Stage::Both => "both".into(),
            },
            "ratios" => join(&self.ratios),
            "algorithms" => self.algorithms.join(","),
            "images" => return path(&self.images),
            "model" => return path(&self.model),
            "models" => return path(&self.models),
            "matrix" => return path(&self.matrix),
            "out" => return path(&self.out),
            _ => return None,
        })
    }

    /// Sets one key from its textual value. Errors name the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.trim().parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, String> {
            v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect()
        }
        let v = value.trim();
        match key {
            "block" => self.block = num(key, v)?,
            "ratio" => self.ratio = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "depth" => self.depth = num(key, v)?,
            "width" => self.width = num(key, v)?,
            "filter" => self.filter = num(key, v)?,
            "final_relu" => self.final_relu = num(key, v)?,
            "precision" => {
                self.precision = match v {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(format!("{key}: expected f32 or f64, got {v:?}")),
                }
            }
            "epochs" => self.epochs = num(key, v)?,
            "iterations" => self.iterations = num(key, v)?,
            "batch" => self.batch = num(key, v)?,
            "lr_stages" => self.lr_stages = parse_stages(v)?,
            "patch" => self.patch = num(key, v)?,
            "patches" => self.patches = num(key, v)?,
            "augment" => self.augment = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "tau0_fraction" => self.tau0_fraction = num(key, v)?,
            "tau_decay" => self.tau_decay = num(key, v)?,
            "max_iters" => self.max_iters = num(key, v)?,
            "rel_tol" => self.rel_tol = num(key, v)?,
            "wiener_window" => self.wiener_window = num(key, v)?,
            "rho" => self.rho = num(key, v)?,
            "stage" => {
                self.stage = match v {
                    "initial" => Stage::Initial,
                    "final" => Stage::Final,
                    "both" => Stage::Both,
                    _ => return Err(format!("{key}: expected initial, final or both, got {v:?}")),
                }
            }
            "ratios" => self.ratios = list(key, v)?,
            "algorithms" => self.algorithms = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            "images" => self.images = Some(v.into()),
            "model" => self.model = Some(v.into()),
            "models" => self.models = Some(v.into()),
            "matrix" => self.matrix = Some(v.into()),
            "out" => self.out = Some(v.into()),
            _ => return Err(format!("unknown configuration key {key:?}")),
        }
        Ok(())
    }

    /// Applies `key = value` lines; returns the keys that were set.
    pub fn apply_text(&mut self, text: &str) -> Result<BTreeSet<String>, String> {
        let mut keys = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            let key = key.trim();
            self.set(key, value).map_err(|e| format!("line {}: {e}", n + 1))?;
            keys.insert(key.to_string());
        }
        Ok(keys)
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn csnet(&self) -> CsNetConfig {
        CsNetConfig {
            block_size: self.block,
            sampling_ratio: self.ratio,
            deep_depth: self.depth,
            deep_width: self.width,
            deep_filter: self.filter,
            final_relu: self.final_relu,
            seed: self.seed.wrapping_add(2),
        }
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            epochs: self.epochs,
            iterations_per_epoch: self.iterations,
            batch_size: self.batch,
            learning_rate_stages: self.lr_stages.clone(),
        }
    }

    pub fn spl(&self) -> SplConfig {
        SplConfig {
            gamma: self.gamma,
            tau0_fraction: self.tau0_fraction,
            tau_decay: self.tau_decay,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            wiener_window: self.wiener_window,
        }
    }

    pub fn matrix_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn patch_seed(&self) -> u64 {
        self.seed.wrapping_add(3)
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.seed.wrapping_add(4)
    }
}

fn parse_stages(v: &str) -> Result<Vec<LrStage>, String> {
    let bad = || format!("lr_stages: expected first-last:rate,..., got {v:?}");
    v.split(',')
        .map(|part| {
            let (range, rate) = part.trim().split_once(':').ok_or_else(bad)?;
            let (a, b) = range.split_once('-').ok_or_else(bad)?;
            Ok(LrStage {
                first_epoch: a.trim().parse().map_err(|_| bad())?,
                last_epoch: b.trim().parse().map_err(|_| bad())?,
                rate: rate.trim().parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
