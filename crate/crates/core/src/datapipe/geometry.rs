use crate::error::{Error, Result};
use crate::layout::{pad_symmetric, Padding};
use crate::netcore::{Real, Tensor};

/// Extends the bottom and right edges by mirror reflection up to the next
/// multiple of `block`. Returns the padded image and the original `(H, W)`.
pub fn pad_to_block_multiple<T: Real>(image: &Tensor<T>, block: usize) -> Result<(Tensor<T>, (usize, usize))> {
    if block < 2 {
        return Err(Error::config(format!("block size must be at least 2, got {block}")));
    }
    let (h, w, _) = image.dims3()?;
    let pad = Padding {
        top: 0,
        bottom: h.div_ceil(block) * block - h,
        left: 0,
        right: w.div_ceil(block) * block - w,
    };
    Ok((pad_symmetric(image, pad)?, (h, w)))
}

/// Top-left `height x width` window.
pub fn crop<T: Real>(image: &Tensor<T>, height: usize, width: usize) -> Result<Tensor<T>> {
    let (h, w, c) = image.dims3()?;
    if height == 0 || width == 0 || height > h || width > w {
        return Err(Error::geometry(format!("cannot crop {h}x{w} to {height}x{width}")));
    }
    let src = image.data();
    let mut data = Vec::with_capacity(height * width * c);
    for i in 0..height {
        data.extend_from_slice(&src[i * w * c..(i * w + width) * c]);
    }
    Tensor::new(&[height, width, c], data)
}

/// Number of [`augment`] modes.
pub const AUGMENT_MODES: usize = 8;

/// Dihedral transform of an `[H, W, C]` image.
///
/// | mode | transform                                   |
/// |------|---------------------------------------------|
/// | 0    | identity                                    |
/// | 1    | rotate 90 degrees counter-clockwise         |
/// | 2    | rotate 180 degrees                          |
/// | 3    | rotate 270 degrees counter-clockwise        |
/// | 4    | flip left-right                             |
/// | 5    | flip top-bottom                             |
/// | 6    | transpose (main diagonal)                   |
/// | 7    | anti-transpose                              |
///
/// Modes 1, 3, 6 and 7 need a square image.
pub fn augment<T: Real>(image: &Tensor<T>, mode: usize) -> Result<Tensor<T>> {
    let (h, w, c) = image.dims3()?;
    if mode >= AUGMENT_MODES {
        return Err(Error::config(format!("augmentation mode {mode} is outside 0..8")));
    }
    if matches!(mode, 1 | 3 | 6 | 7) && h != w {
        return Err(Error::geometry(format!(
            "mode {mode} needs a square image, got {h}x{w}"
        )));
    }
    // source pixel for output (i, j)
    let source = |i: usize, j: usize| match mode {
        0 => (i, j),
        1 => (j, w - 1 - i),
        2 => (h - 1 - i, w - 1 - j),
        3 => (h - 1 - j, i),
        4 => (i, w - 1 - j),
        5 => (h - 1 - i, j),
        6 => (j, i),
        _ => (h - 1 - j, w - 1 - i),
    };
    let src = image.data();
    let mut out = Vec::with_capacity(src.len());
    for i in 0..h {
        for j in 0..w {
            let (si, sj) = source(i, j);
            out.extend_from_slice(&src[(si * w + sj) * c..(si * w + sj + 1) * c]);
        }
    }
    Tensor::new(&[h, w, c], out)
}
