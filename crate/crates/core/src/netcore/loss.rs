use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Batch reconstruction loss `(1 / 2N) * sum ||prediction - target||^2`.
///
/// Returns the loss (accumulated in `f64`) and its gradient
/// `(prediction - target) / N` with respect to `prediction`.
pub fn mse_loss<T: Real>(
    prediction: &Tensor<T>,
    target: &Tensor<T>,
    batch_count: usize,
) -> Result<(f64, Tensor<T>)> {
    prediction.ensure_same_shape(target, "mse_loss")?;
    if batch_count == 0 {
        return Err(Error::config("batch count must be at least 1"));
    }
    let n = T::of(batch_count as f64);
    let mut sum = 0.0;
    let grad = prediction
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.f64() * d.f64();
            d / n
        })
        .collect();
    Ok((sum / (2.0 * batch_count as f64), Tensor::new(prediction.shape(), grad)?))
}
