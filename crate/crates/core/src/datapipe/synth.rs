use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;

use super::{epoch_rng, save_image};
use crate::error::{Error, Result};
use crate::netcore::Tensor;

/// Piecewise-smooth test image: a linear ramp, overlaid with 3-6 disks and
/// half-planes that each carry their own ramp (sharp edges at their
/// boundaries), plus a faint low-frequency ripple. Values are clamped to
/// `[0, 1]`.
pub fn synthetic_image<R: Rng>(height: usize, width: usize, rng: &mut R) -> Tensor<f64> {
    let scale = height.max(width) as f64;
    let ramp = |rng: &mut R| (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
    let base = rng.gen_range(0.25..0.75);
    let (gx, gy) = ramp(rng);

    enum Shape {
        Disk { cx: f64, cy: f64, r: f64 },
        Half { px: f64, py: f64, nx: f64, ny: f64 },
    }
    let regions: Vec<(Shape, f64, (f64, f64))> = (0..rng.gen_range(3..=6))
        .map(|_| {
            let shape = if rng.gen_bool(0.5) {
                Shape::Disk {
                    cx: rng.gen_range(0.0..1.0),
                    cy: rng.gen_range(0.0..1.0),
                    r: rng.gen_range(0.1..0.4),
                }
            } else {
                let angle = rng.gen_range(0.0..2.0 * PI);
                Shape::Half {
                    px: rng.gen_range(0.2..0.8),
                    py: rng.gen_range(0.2..0.8),
                    nx: angle.cos(),
                    ny: angle.sin(),
                }
            };
            let step = rng.gen_range(0.15..0.4) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (shape, step, ramp(rng))
        })
        .collect();
    let (fx, fy, phase) = (rng.gen_range(1.0..4.0), rng.gen_range(1.0..4.0), rng.gen_range(0.0..2.0 * PI));

    Tensor::from_fn(&[height, width, 1], |idx| {
        let (y, x) = ((idx / width) as f64 / scale, (idx % width) as f64 / scale);
        let mut v = base + gx * (x - 0.5) + gy * (y - 0.5);
        for (shape, step, (rx, ry)) in &regions {
            let inside = match *shape {
                Shape::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) < r * r,
                Shape::Half { px, py, nx, ny } => (x - px) * nx + (y - py) * ny > 0.0,
            };
            if inside {
                v += step + rx * (x - 0.5) + ry * (y - 0.5);
            }
        }
        v += 0.04 * (2.0 * PI * (fx * x + fy * y) + phase).sin();
        v.clamp(0.0, 1.0)
    })
}

/// Writes `count` images `synth_000.pgm`, ... into `dir`; image `k` uses
/// generator stream `k` of `seed`.
pub fn write_synthetic_corpus(dir: &Path, count: usize, height: usize, width: usize, seed: u64) -> Result<Vec<PathBuf>> {
    if height == 0 || width == 0 {
        return Err(Error::config("synthetic images need positive dimensions"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..count)
        .map(|k| {
            let path = dir.join(format!("synth_{k:03}.pgm"));
            save_image(&synthetic_image(height, width, &mut epoch_rng(seed, k as u64)), &path)?;
            Ok(path)
        })
        .collect()
}
