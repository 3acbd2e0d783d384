use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::{augment, ImageRecord, AUGMENT_MODES};
use crate::error::{Error, Result};
use crate::netcore::{seeded_rng, Real, Tensor};

/// Where a patch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchOrigin {
    /// Index into the image list passed to [`extract_patches`].
    pub image: usize,
    pub row: usize,
    pub col: usize,
    /// Augmentation mode applied after cropping.
    pub mode: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    /// `[P, P, 1]` copies.
    pub patches: Vec<Tensor<f64>>,
    pub origins: Vec<PatchOrigin>,
    /// Name of every image in the source list.
    pub sources: Vec<String>,
    pub seed: u64,
}

/// Draws `count` square patches with replacement.
///
/// Each draw picks an image uniformly among those at least `P x P`, then a
/// uniformly random top-left corner, then (if `augment_modes`) a uniformly
/// random dihedral mode. Smaller images are skipped with a warning.
pub fn extract_patches(
    images: &[ImageRecord],
    patch_size: usize,
    count: usize,
    seed: u64,
    augment_modes: bool,
) -> Result<PatchSet> {
    if patch_size == 0 {
        return Err(Error::config("patch size must be positive"));
    }
    let mut eligible = Vec::new();
    for (k, img) in images.iter().enumerate() {
        let (h, w, _) = img.pixels.dims3()?;
        if h >= patch_size && w >= patch_size {
            eligible.push(k);
        } else {
            log::warn!("skipping {} ({h}x{w}): smaller than a {patch_size}x{patch_size} patch", img.name);
        }
    }
    if eligible.is_empty() {
        return Err(Error::config(format!(
            "no image is at least {patch_size}x{patch_size}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut patches = Vec::with_capacity(count);
    let mut origins = Vec::with_capacity(count);
    for _ in 0..count {
        let image = eligible[rng.gen_range(0..eligible.len())];
        let (h, w, _) = images[image].pixels.dims3()?;
        let row = rng.gen_range(0..=h - patch_size);
        let col = rng.gen_range(0..=w - patch_size);
        let mode = if augment_modes { rng.gen_range(0..AUGMENT_MODES) } else { 0 };
        let src = images[image].pixels.data();
        let mut data = Vec::with_capacity(patch_size * patch_size);
        for r in row..row + patch_size {
            data.extend_from_slice(&src[r * w + col..r * w + col + patch_size]);
        }
        patches.push(augment(&Tensor::image(patch_size, patch_size, data)?, mode)?);
        origins.push(PatchOrigin { image, row, col, mode });
    }
    Ok(PatchSet {
        patches,
        origins,
        sources: images.iter().map(|i| i.name.clone()).collect(),
        seed,
    })
}

/// Generator for epoch `epoch` of a run seeded with `seed`: the same key,
/// with the epoch as stream number.
pub fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    rng
}

/// One shuffled pass over a patch list in stacked `[N, P, P, C]` batches.
/// A trailing partial batch is dropped.
#[derive(Debug)]
pub struct BatchIter<'a, T: Real> {
    patches: &'a [Tensor<T>],
    order: Vec<usize>,
    batch_size: usize,
    next: usize,
}

pub fn batch_iter<'a, T: Real, R: Rng>(
    patches: &'a [Tensor<T>],
    batch_size: usize,
    rng: &mut R,
) -> Result<BatchIter<'a, T>> {
    if batch_size == 0 || batch_size > patches.len() {
        return Err(Error::config(format!(
            "batch size {batch_size} must lie in 1..={}",
            patches.len()
        )));
    }
    let mut order: Vec<usize> = (0..patches.len()).collect();
    order.shuffle(rng);
    Ok(BatchIter {
        patches,
        order,
        batch_size,
        next: 0,
    })
}

impl<'a, T: Real> BatchIter<'a, T> {
    /// Patch indices in visiting order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

impl<'a, T: Real> Iterator for BatchIter<'a, T> {
    type Item = Tensor<T>;

    fn next(&mut self) -> Option<Tensor<T>> {
        if self.next + self.batch_size > self.order.len() {
            return None;
        }
        let items: Vec<Tensor<T>> = self.order[self.next..self.next + self.batch_size]
            .iter()
            .map(|&k| self.patches[k].clone())
            .collect();
        self.next += self.batch_size;
        Some(Tensor::stack(&items).expect("patches share one shape"))
    }
}
