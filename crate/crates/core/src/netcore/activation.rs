use super::{Real, Tensor};
use crate::error::Result;

pub fn relu_forward<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `grad_out` where `input > 0`; the subgradient at exactly zero is zero.
pub fn relu_backward<T: Real>(grad_out: &Tensor<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.ensure_same_shape(input, "relu_backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(input.data())
        .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}
