//! Block layout and boundary conventions shared by both pipelines.
//!
//! A `B x B` block is flattened row-major into a `B^2` vector, and blocks are
//! visited in row-major order over the block grid. The same convention
//! orders the columns of a measurement matrix, the taps of a learned sampling
//! filter and the output channels of the initial reconstruction layer.

use crate::error::{Error, Result};
use crate::netcore::{Real, Tensor};

/// Reassembles `[h, w, B^2]` block vectors into an `[h B, w B, 1]` image.
pub fn combine<T: Real>(blocks: &Tensor<T>, block: usize) -> Result<Tensor<T>> {
    let (h, w, c) = blocks.dims3()?;
    if c != block * block {
        return Err(Error::dim(format!(
            "{c} channels cannot be reshaped into {block}x{block} blocks"
        )));
    }
    let width = w * block;
    let mut out = Tensor::zeros(&[h * block, width, 1]);
    let src = blocks.data();
    let dst = out.data_mut();
    for bi in 0..h {
        for bj in 0..w {
            let vector = &src[(bi * w + bj) * c..(bi * w + bj + 1) * c];
            for r in 0..block {
                let start = (bi * block + r) * width + bj * block;
                dst[start..start + block].copy_from_slice(&vector[r * block..(r + 1) * block]);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`combine`]: cuts an `[H, W, 1]` image into `[H/B, W/B, B^2]`.
pub fn split_blocks<T: Real>(image: &Tensor<T>, block: usize) -> Result<Tensor<T>> {
    let (height, width, c) = image.dims3()?;
    if c != 1 {
        return Err(Error::dim(format!("expected one channel, got {c}")));
    }
    if block == 0 || height % block != 0 || width % block != 0 {
        return Err(Error::geometry(format!(
            "{height}x{width} image is not a multiple of block size {block}"
        )));
    }
    let (h, w, n) = (height / block, width / block, block * block);
    let mut out = Tensor::zeros(&[h, w, n]);
    let src = image.data();
    let dst = out.data_mut();
    for bi in 0..h {
        for bj in 0..w {
            let vector = &mut dst[(bi * w + bj) * n..(bi * w + bj + 1) * n];
            for r in 0..block {
                let start = (bi * block + r) * width + bj * block;
                vector[r * block..(r + 1) * block].copy_from_slice(&src[start..start + block]);
            }
        }
    }
    Ok(out)
}

/// Maps a possibly out-of-range coordinate onto `0..len` by half-sample
/// symmetric reflection (`-1 -> 0`, `len -> len - 1`), folding repeatedly
/// when the overhang exceeds `len`.
pub fn symmetric_index(index: isize, len: usize) -> usize {
    let period = 2 * len as isize;
    let k = index.rem_euclid(period);
    if k < len as isize {
        k as usize
    } else {
        (period - 1 - k) as usize
    }
}

/// Per-side padding widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub fn uniform(width: usize) -> Self {
        Self {
            top: width,
            bottom: width,
            left: width,
            right: width,
        }
    }
}

/// Symmetric (mirror, edge included) padding of an `[H, W, C]` tensor.
pub fn pad_symmetric<T: Real>(input: &Tensor<T>, pad: Padding) -> Result<Tensor<T>> {
    let (h, w, c) = input.dims3()?;
    let (ph, pw) = (h + pad.top + pad.bottom, w + pad.left + pad.right);
    let cols: Vec<usize> = (0..pw)
        .map(|j| symmetric_index(j as isize - pad.left as isize, w))
        .collect();
    let mut out = Tensor::zeros(&[ph, pw, c]);
    let src = input.data();
    let dst = out.data_mut();
    for i in 0..ph {
        let si = symmetric_index(i as isize - pad.top as isize, h);
        for (j, &sj) in cols.iter().enumerate() {
            let d = (i * pw + j) * c;
            let s = (si * w + sj) * c;
            dst[d..d + c].copy_from_slice(&src[s..s + c]);
        }
    }
    Ok(out)
}

/// Adjoint of [`pad_symmetric`]: folds a gradient on the padded tensor back
/// onto the `height x width` source by summing over every reflected copy.
pub fn pad_symmetric_backward<T: Real>(
    grad_padded: &Tensor<T>,
    pad: Padding,
    height: usize,
    width: usize,
) -> Result<Tensor<T>> {
    let (ph, pw, c) = grad_padded.dims3()?;
    if ph != height + pad.top + pad.bottom || pw != width + pad.left + pad.right {
        return Err(Error::dim(format!(
            "padded gradient {ph}x{pw} does not match {height}x{width} with {pad:?}"
        )));
    }
    let cols: Vec<usize> = (0..pw)
        .map(|j| symmetric_index(j as isize - pad.left as isize, width))
        .collect();
    let mut out = Tensor::zeros(&[height, width, c]);
    let src = grad_padded.data();
    let dst = out.data_mut();
    for i in 0..ph {
        let si = symmetric_index(i as isize - pad.top as isize, height);
        for (j, &sj) in cols.iter().enumerate() {
            let s = (i * pw + j) * c;
            let d = (si * width + sj) * c;
            for k in 0..c {
                dst[d + k] = dst[d + k] + src[s + k];
            }
        }
    }
    Ok(out)
}
