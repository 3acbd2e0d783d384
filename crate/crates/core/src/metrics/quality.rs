use crate::error::{Error, Result};
use crate::netcore::Tensor;

/// `10 log10(peak^2 / MSE)` in dB; `f64::INFINITY` for identical images.
pub fn psnr(reference: &Tensor<f64>, test: &Tensor<f64>, peak: f64) -> Result<f64> {
    reference.ensure_same_shape(test, "psnr")?;
    if !(peak > 0.0) {
        return Err(Error::config(format!("peak must be positive, got {peak}")));
    }
    let sse: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / reference.len() as f64;
    Ok(10.0 * (peak * peak / mse).log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

/// Mean SSIM over every valid 11x11 window position, Gaussian weights with
/// sigma 1.5, and `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2` for a peak `L = 1`.
pub fn ssim(reference: &Tensor<f64>, test: &Tensor<f64>) -> Result<f64> {
    ssim_with_peak(reference, test, 1.0)
}

pub fn ssim_with_peak(reference: &Tensor<f64>, test: &Tensor<f64>, peak: f64) -> Result<f64> {
    reference.ensure_same_shape(test, "ssim")?;
    let (h, w, c) = reference.dims3()?;
    if c != 1 {
        return Err(Error::dim(format!("ssim expects one channel, got {c}")));
    }
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::geometry(format!(
            "{h}x{w} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let g = gaussian_kernel();
    let (x, y) = (reference.data(), test.data());

    // separable filtering of the five moment images, valid region only
    let fields: [Vec<f64>; 5] = [
        x.to_vec(),
        y.to_vec(),
        x.iter().map(|v| v * v).collect(),
        y.iter().map(|v| v * v).collect(),
        x.iter().zip(y).map(|(a, b)| a * b).collect(),
    ];
    let (ho, wo) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let [mx, my, xx, yy, xy] = fields.map(|f| filter_valid(&f, h, w, &g));

    let mut total = 0.0;
    for k in 0..ho * wo {
        let (mu_x, mu_y) = (mx[k], my[k]);
        let var_x = xx[k] - mu_x * mu_x;
        let var_y = yy[k] - mu_y * mu_y;
        let cov = xy[k] - mu_x * mu_y;
        total += ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
            / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
    }
    Ok(total / (ho * wo) as f64)
}

fn gaussian_kernel() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..SSIM_WINDOW)
        .map(|k| (-(k as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

fn filter_valid(field: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let wo = w - n + 1;
    let ho = h - n + 1;
    let mut rows = vec![0.0; h * wo];
    for i in 0..h {
        for j in 0..wo {
            rows[i * wo + j] = g.iter().zip(&field[i * w + j..i * w + j + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ho * wo];
    for i in 0..ho {
        for j in 0..wo {
            out[i * wo + j] = g.iter().enumerate().map(|(k, a)| a * rows[(i + k) * wo + j]).sum();
        }
    }
    out
}
