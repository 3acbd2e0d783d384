use nalgebra::DMatrix;

use super::MeasurementMatrix;
use crate::error::{Error, Result};
use crate::layout::{combine, split_blocks};
use crate::netcore::Tensor;

/// Condition estimates above this make [`mmse_matrix`] fail.
pub const MAX_CONDITION: f64 = 1e12;

/// Pixel autocorrelation model of a `B x B` block.
#[derive(Debug, Clone, PartialEq)]
pub struct Autocorrelation {
    block_size: usize,
    rho: f64,
    matrix: Vec<f64>,
}

impl Autocorrelation {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Row-major `B^2 x B^2`.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn identity(block_size: usize) -> Self {
        ar1_autocorrelation(block_size, 0.0).expect("rho = 0 is valid")
    }
}

/// Separable AR(1) model: `R[(i,j),(k,l)] = rho^(|i-k| + |j-l|)`.
pub fn ar1_autocorrelation(block_size: usize, rho: f64) -> Result<Autocorrelation> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::config(format!("rho must lie in [0, 1), got {rho}")));
    }
    let n = block_size * block_size;
    let mut matrix = vec![0.0; n * n];
    for p in 0..n {
        let (i, j) = (p / block_size, p % block_size);
        for q in 0..n {
            let (k, l) = (q / block_size, q % block_size);
            matrix[p * n + q] = rho.powi((i.abs_diff(k) + j.abs_diff(l)) as i32);
        }
    }
    Ok(Autocorrelation {
        block_size,
        rho,
        matrix,
    })
}

/// Linear block estimator: row-major `B^2 x n_B` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionMatrix {
    block_size: usize,
    measurements: usize,
    entries: Vec<f64>,
}

impl ReconstructionMatrix {
    pub fn new(block_size: usize, measurements: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != block_size * block_size * measurements {
            return Err(Error::dim(format!(
                "{}x{measurements} estimator needs {} entries, got {}",
                block_size * block_size,
                block_size * block_size * measurements,
                entries.len()
            )));
        }
        Ok(Self {
            block_size,
            measurements,
            entries,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn measurements(&self) -> usize {
        self.measurements
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.measurements)
            .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// `R Phi^T (Phi R Phi^T)^{-1}`, obtained from a Cholesky solve of the
/// `n_B x n_B` Gram system rather than an explicit inverse.
pub fn mmse_matrix(phi: &MeasurementMatrix, r: &Autocorrelation) -> Result<ReconstructionMatrix> {
    if phi.block_size() != r.block_size() {
        return Err(Error::dim(format!(
            "matrix block size {} differs from autocorrelation block size {}",
            phi.block_size(),
            r.block_size()
        )));
    }
    let (m, n) = (phi.rows(), phi.cols());
    let phi_m = DMatrix::from_row_slice(m, n, phi.entries());
    let r_m = DMatrix::from_row_slice(n, n, r.matrix());
    let r_phi_t = &r_m * phi_m.transpose(); // n x m
    let mut gram = &phi_m * &r_phi_t; // m x m
    gram = (&gram + gram.transpose()) * 0.5;

    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("Phi R Phi^T is not positive definite".into()))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let condition = (hi / lo).powi(2);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Numerical(format!(
            "Phi R Phi^T is ill-conditioned (estimate {condition:.3e})"
        )));
    }
    // gram is symmetric, so Phi~^T = gram^{-1} (R Phi^T)^T
    let solved = chol.solve(&r_phi_t.transpose()); // m x n
    let mut entries = Vec::with_capacity(n * m);
    for i in 0..n {
        for k in 0..m {
            entries.push(solved[(k, i)]);
        }
    }
    ReconstructionMatrix::new(phi.block_size(), m, entries)
}

/// Measures every non-overlapping block: `y_j = Phi x_j`, returned as
/// `[H/B, W/B, n_B]` in row-major block order.
pub fn block_sample(image: &Tensor<f64>, phi: &MeasurementMatrix) -> Result<Tensor<f64>> {
    let blocks = split_blocks(image, phi.block_size())?;
    let (h, w, _) = blocks.dims3()?;
    let data = blocks
        .data()
        .chunks_exact(phi.cols())
        .flat_map(|x| phi.apply(x))
        .collect();
    Tensor::new(&[h, w, phi.rows()], data)
}

/// Per-block linear estimate `x_j = Phi~ y_j`, reassembled into an image.
pub fn mmse_initial(measurements: &Tensor<f64>, phi_tilde: &ReconstructionMatrix) -> Result<Tensor<f64>> {
    let (h, w, c) = measurements.dims3()?;
    if c != phi_tilde.measurements() {
        return Err(Error::dim(format!(
            "{c} measurements per block, estimator expects {}",
            phi_tilde.measurements()
        )));
    }
    let b = phi_tilde.block_size();
    let data = measurements
        .data()
        .chunks_exact(c)
        .flat_map(|y| phi_tilde.apply(y))
        .collect();
    combine(&Tensor::new(&[h, w, b * b], data)?, b)
}
