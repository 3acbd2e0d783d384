use super::{Real, Tensor};
use crate::error::Result;

/// Per-parameter state of the Adam optimizer with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Real> {
    pub first_moment: Tensor<T>,
    pub second_moment: Tensor<T>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl<T: Real> AdamState<T> {
    /// Zero moments shaped like `shape`, decay rates 0.9 / 0.999, epsilon 1e-8.
    pub fn new(shape: &[usize], learning_rate: f64) -> Self {
        Self {
            first_moment: Tensor::zeros(shape),
            second_moment: Tensor::zeros(shape),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
        }
    }

    /// Applies one update to `param`. Shapes are validated before anything
    /// is modified.
    pub fn step(&mut self, param: &mut Tensor<T>, grad: &Tensor<T>) -> Result<()> {
        param.ensure_same_shape(grad, "adam gradient")?;
        param.ensure_same_shape(&self.first_moment, "adam moments")?;

        self.step_count += 1;
        let t = self.step_count as i32;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let one = T::one();
        let correction1 = T::of(1.0 - self.beta1.powi(t));
        let correction2 = T::of(1.0 - self.beta2.powi(t));
        let lr = T::of(self.learning_rate);
        let eps = T::of(self.epsilon);

        let moments = self
            .first_moment
            .data_mut()
            .iter_mut()
            .zip(self.second_moment.data_mut().iter_mut());
        for ((p, &g), (m, v)) in param.data_mut().iter_mut().zip(grad.data()).zip(moments) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step<T: Real>(
    param: &Tensor<T>,
    grad: &Tensor<T>,
    state: &AdamState<T>,
) -> Result<(Tensor<T>, AdamState<T>)> {
    let mut param = param.clone();
    let mut state = state.clone();
    state.step(&mut param, grad)?;
    Ok((param, state))
}
