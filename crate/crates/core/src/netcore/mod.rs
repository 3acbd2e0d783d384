//! Deterministic tensor and differentiation kernel.

mod activation;
mod adam;
mod conv;
mod gradcheck;
mod init;
mod loss;
mod real;
mod tensor;

pub use activation::{relu_backward, relu_forward};
pub use adam::{adam_step, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvSpec};
pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error, RELATIVE_ERROR_FLOOR};
pub use init::{gaussian_tensor, he_init, seeded_rng, uniform_tensor, GaussianSampler, SeededRng};
pub use loss::mse_loss;
pub use real::Real;
pub use tensor::Tensor;

#[cfg(test)]
mod properties;
