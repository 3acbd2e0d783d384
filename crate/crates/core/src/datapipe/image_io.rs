use std::io::Write;
use std::path::{Path, PathBuf};

use image::DynamicImage;

use crate::error::{Error, Result};
use crate::netcore::Tensor;

/// A grayscale image in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub name: String,
    /// `[H, W, 1]`
    pub pixels: Tensor<f64>,
    /// `(H, W)` before any padding.
    pub original_dims: (usize, usize),
}

impl ImageRecord {
    pub fn new(name: impl Into<String>, pixels: Tensor<f64>) -> Result<Self> {
        let (h, w, c) = pixels.dims3()?;
        if c != 1 {
            return Err(Error::dim(format!("expected one channel, got {c}")));
        }
        Ok(Self {
            name: name.into(),
            pixels,
            original_dims: (h, w),
        })
    }
}

/// Reads an 8-bit PGM (P5) or PNG. Colour is reduced to
/// `0.299 R + 0.587 G + 0.114 B`; alpha is ignored.
pub fn load_image(path: &Path) -> Result<ImageRecord> {
    let label = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| Error::format(&label, e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(img) => img.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(img) => img.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageRgb8(img) => img.pixels().map(|p| luminance(p.0[0], p.0[1], p.0[2])).collect(),
        DynamicImage::ImageRgba8(img) => img.pixels().map(|p| luminance(p.0[0], p.0[1], p.0[2])).collect(),
        other => {
            return Err(Error::format(
                &label,
                format!("unsupported pixel format {:?}; only 8-bit gray or RGB", other.color()),
            ))
        }
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| label.clone());
    ImageRecord::new(name, Tensor::image(h, w, data)?)
}

fn luminance(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

/// Writes a binary PGM with samples `round(clamp(x, 0, 1) * 255)`.
pub fn save_image(image: &Tensor<f64>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_pgm(image, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_pgm(image: &Tensor<f64>, mut out: impl Write) -> Result<()> {
    let (h, w, c) = image.dims3()?;
    if c != 1 {
        return Err(Error::dim(format!("expected one channel, got {c}")));
    }
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(image.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out.write_all(&bytes).map_err(|e| Error::io("pgm stream", e))
}

/// `.pgm` and `.png` files of `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        if path.is_file() && (ext == "pgm" || ext == "png") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn load_dir(dir: &Path) -> Result<Vec<ImageRecord>> {
    list_images(dir)?.iter().map(|p| load_image(p)).collect()
}
