//! Image files, padding, augmentation, patch sampling and batching.

mod geometry;
mod image_io;
mod patches;
mod synth;

pub use geometry::{augment, crop, pad_to_block_multiple, AUGMENT_MODES};
pub use image_io::{list_images, load_dir, load_image, save_image, write_pgm, ImageRecord};
pub use patches::{batch_iter, epoch_rng, extract_patches, BatchIter, PatchOrigin, PatchSet};
pub use synth::{synthetic_image, write_synthetic_corpus};
