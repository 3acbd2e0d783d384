//! Central-difference gradient oracle for checking analytic backward passes.

use super::Tensor;

/// Central differences `(f(x + eps e_k) - f(x - eps e_k)) / 2 eps` for every
/// coordinate `k` of `point`.
pub fn finite_diff_grad(
    mut loss_fn: impl FnMut(&Tensor<f64>) -> f64,
    point: &Tensor<f64>,
    eps: f64,
) -> Tensor<f64> {
    assert!(eps > 0.0, "eps must be positive");
    let mut probe = point.clone();
    let mut grad = Tensor::zeros(point.shape());
    for k in 0..point.len() {
        let x = point.data()[k];
        probe.data_mut()[k] = x + eps;
        let up = loss_fn(&probe);
        probe.data_mut()[k] = x - eps;
        let down = loss_fn(&probe);
        probe.data_mut()[k] = x;
        grad.data_mut()[k] = (up - down) / (2.0 * eps);
    }
    grad
}

/// Magnitude below which gradient entries are compared absolutely.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Largest [`relative_error`] over paired entries.
///
/// # Panics
/// If the shapes differ.
pub fn max_relative_error(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &b)| relative_error(a, b))
        .fold(0.0, f64::max)
}
