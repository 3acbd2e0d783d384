//! Classical block compressed sensing: random block measurements, a linear
//! MMSE initial estimate and smoothed projected Landweber (SPL) recovery with
//! DCT hard thresholding.

mod dct;
mod matrix;
mod mmse;
mod spl;
mod wiener;

pub use dct::{dct2_forward, dct2_inverse, hard_threshold, Dct2};
pub use matrix::{make_gaussian_matrix, MeasurementMatrix};
pub use mmse::{
    ar1_autocorrelation, block_sample, mmse_initial, mmse_matrix, Autocorrelation, ReconstructionMatrix,
    MAX_CONDITION,
};
pub use spl::{residual, spl_reconstruct, SplConfig, SplIteration, SplOutcome};
pub use wiener::wiener_smooth;
