//! Block compressed sensing for grayscale images.
//!
//! Two reconstruction pipelines share one block layout:
//!
//! * [`bcs_spl`]: random measurement matrices, a linear MMSE initial
//!   estimate and smoothed projected Landweber recovery with DCT
//!   hard thresholding.
//! * [`csnet`]: a convolutional network whose first layer is a learned
//!   block sampling matrix, followed by a learned linear initial
//!   reconstruction and a small convolutional refinement stack, trained end
//!   to end.
//!
//! [`netcore`] supplies the tensor and convolution kernels, [`datapipe`] the
//! image I/O and training data, and [`metrics`] PSNR/SSIM/timing and CSV
//! reports.

pub mod bcs_spl;
pub mod csnet;
pub mod datapipe;
pub mod error;
pub mod layout;
pub mod metrics;
pub mod netcore;

pub use error::{Error, Result};
pub use netcore::{Real, Tensor};
