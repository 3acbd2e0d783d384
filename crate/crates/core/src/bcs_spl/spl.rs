use super::{mmse_initial, mmse_matrix, wiener_smooth, Autocorrelation, Dct2, MeasurementMatrix};
use crate::bcs_spl::hard_threshold;
use crate::error::{Error, Result};
use crate::layout::{combine, split_blocks};
use crate::netcore::Tensor;

/// Parameters of smoothed projected Landweber recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct SplConfig {
    /// Landweber step is `1 / gamma`.
    pub gamma: f64,
    /// Initial threshold as a fraction of the largest DCT coefficient
    /// magnitude of the MMSE estimate.
    pub tau0_fraction: f64,
    /// Per-iteration multiplicative threshold decay.
    pub tau_decay: f64,
    pub max_iters: usize,
    /// Stop once `||x_{i+1} - x_i|| / ||x_i||` drops below this.
    pub rel_tol: f64,
    /// Odd Wiener window, or 0 to skip smoothing.
    pub wiener_window: usize,
}

impl Default for SplConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            tau0_fraction: 0.1,
            tau_decay: 0.95,
            max_iters: 200,
            rel_tol: 1e-4,
            wiener_window: 3,
        }
    }
}

impl SplConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::config("gamma must be positive"));
        }
        if !(self.tau0_fraction >= 0.0) {
            return Err(Error::config("tau0_fraction must be non-negative"));
        }
        if !(self.tau_decay > 0.0 && self.tau_decay < 1.0) {
            return Err(Error::config("tau_decay must lie in (0, 1)"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::config("rel_tol must be non-negative"));
        }
        if self.wiener_window != 0 && (self.wiener_window < 3 || self.wiener_window % 2 == 0) {
            return Err(Error::config("wiener_window must be 0 or an odd number >= 3"));
        }
        Ok(())
    }
}

/// One row of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplIteration {
    /// 1-based.
    pub iteration: usize,
    pub tau: f64,
    /// `||y - Phi x||` after the closing projection.
    pub residual: f64,
    /// `||x_{i+1} - x_i|| / ||x_i||`.
    pub change: f64,
}

#[derive(Debug, Clone)]
pub struct SplOutcome {
    pub image: Tensor<f64>,
    /// Residual of the MMSE starting point.
    pub initial_residual: f64,
    pub iterations: Vec<SplIteration>,
    pub converged: bool,
}

/// Reconstructs an image from block measurements `[h, w, n_B]`.
///
/// Starts from the MMSE estimate and alternates optional Wiener smoothing,
/// a Landweber projection, DCT hard thresholding with a geometrically
/// decaying threshold and a closing Landweber projection.
pub fn spl_reconstruct(
    measurements: &Tensor<f64>,
    phi: &MeasurementMatrix,
    r: &Autocorrelation,
    config: &SplConfig,
) -> Result<SplOutcome> {
    config.validate()?;
    let (_, _, c) = measurements.dims3()?;
    if c != phi.rows() {
        return Err(Error::dim(format!(
            "{c} measurements per block, matrix has {} rows",
            phi.rows()
        )));
    }
    let b = phi.block_size();
    let dct = Dct2::new(b);
    let phi_tilde = mmse_matrix(phi, r)?;
    let mut x = mmse_initial(measurements, &phi_tilde)?;
    let initial_residual = residual(&x, measurements, phi)?;

    // DC carries the block mean, not detail: it neither sets nor feels the
    // threshold
    let tau0 = config.tau0_fraction
        * split_blocks(&x, b)?
            .data()
            .chunks_exact(b * b)
            .flat_map(|blk| dct.forward(blk).into_iter().skip(1))
            .fold(0.0_f64, |m, v| m.max(v.abs()));

    let step = 1.0 / config.gamma;
    let mut log = Vec::with_capacity(config.max_iters);
    let mut converged = false;
    for i in 0..config.max_iters {
        let tau = tau0 * config.tau_decay.powi(i as i32);
        let smoothed = if config.wiener_window > 0 {
            wiener_smooth(&x, config.wiener_window)?
        } else {
            x.clone()
        };
        let mut blocks = split_blocks(&smoothed, b)?;
        let (h, w, n) = blocks.dims3()?;
        for (blk, y) in blocks
            .data_mut()
            .chunks_exact_mut(n)
            .zip(measurements.data().chunks_exact(c))
        {
            landweber(blk, y, phi, step);
            let coeffs = dct.forward(blk);
            let mut kept = hard_threshold(&coeffs, tau);
            kept[0] = coeffs[0];
            blk.copy_from_slice(&dct.inverse(&kept));
            landweber(blk, y, phi, step);
        }
        let next = combine(&Tensor::new(&[h, w, n], blocks.into_data())?, b)?;

        let change = norm_diff(&next, &x) / norm(&x).max(f64::MIN_POSITIVE);
        let res = residual(&next, measurements, phi)?;
        log.push(SplIteration {
            iteration: i + 1,
            tau,
            residual: res,
            change,
        });
        x = next;
        if change < config.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(SplOutcome {
        image: x,
        initial_residual,
        iterations: log,
        converged,
    })
}

/// `x <- x + step * Phi^T (y - Phi x)` on one flattened block.
fn landweber(block: &mut [f64], y: &[f64], phi: &MeasurementMatrix, step: f64) {
    let misfit: Vec<f64> = phi
        .apply(block)
        .iter()
        .zip(y)
        .map(|(p, y)| y - p)
        .collect();
    for (v, d) in block.iter_mut().zip(phi.apply_transpose(&misfit)) {
        *v += step * d;
    }
}

/// `||y - Phi x||` over all blocks.
pub fn residual(image: &Tensor<f64>, measurements: &Tensor<f64>, phi: &MeasurementMatrix) -> Result<f64> {
    let predicted = super::block_sample(image, phi)?;
    predicted.ensure_same_shape(measurements, "residual")?;
    Ok(norm_diff(&predicted, measurements))
}

fn norm(t: &Tensor<f64>) -> f64 {
    t.data().iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn norm_diff(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcs_spl::{ar1_autocorrelation, block_sample, make_gaussian_matrix};
    use crate::netcore::{seeded_rng, uniform_tensor};

    #[test]
    fn determined_system_recovers_exactly() {
        let phi = make_gaussian_matrix(64, 8, &mut seeded_rng(1), true).unwrap();
        let img = uniform_tensor::<f64>(&[16, 16, 1], &mut seeded_rng(2)).map(|v| 0.5 + 0.5 * v);
        let y = block_sample(&img, &phi).unwrap();
        let r = ar1_autocorrelation(8, 0.95).unwrap();
        let out = spl_reconstruct(&y, &phi, &r, &SplConfig::default()).unwrap();
        assert!(out.iterations.len() <= 3);
        assert!(out.image.max_abs_diff(&img).unwrap() < 1e-6);
        // closing projection keeps the residual at rounding level throughout
        for it in &out.iterations {
            assert!(it.residual < 1e-10);
        }
    }

    #[test]
    fn projection_is_idempotent_on_consistent_estimates() {
        let phi = make_gaussian_matrix(20, 8, &mut seeded_rng(3), true).unwrap();
        let x: Vec<f64> = uniform_tensor::<f64>(&[64], &mut seeded_rng(4)).into_data();
        let y = phi.apply(&x);
        let mut z = x.clone();
        landweber(&mut z, &y, &phi, 1.0);
        assert!(x.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn log_records_geometric_threshold() {
        let phi = make_gaussian_matrix(16, 8, &mut seeded_rng(5), true).unwrap();
        let img = uniform_tensor::<f64>(&[16, 16, 1], &mut seeded_rng(6));
        let y = block_sample(&img, &phi).unwrap();
        let cfg = SplConfig {
            max_iters: 5,
            rel_tol: 0.0,
            ..SplConfig::default()
        };
        let out = spl_reconstruct(&y, &phi, &ar1_autocorrelation(8, 0.95).unwrap(), &cfg).unwrap();
        assert_eq!(out.iterations.len(), 5);
        for w in out.iterations.windows(2) {
            assert!((w[1].tau / w[0].tau - 0.95).abs() < 1e-12);
        }
        assert!(!out.converged);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            SplConfig { gamma: 0.0, ..SplConfig::default() },
            SplConfig { tau_decay: 1.0, ..SplConfig::default() },
            SplConfig { max_iters: 0, ..SplConfig::default() },
            SplConfig { wiener_window: 4, ..SplConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }
}
