use crate::error::{Error, Result};
use crate::layout::symmetric_index;
use crate::netcore::Tensor;

/// Adaptive local Wiener filter over a `window x window` neighbourhood.
///
/// With local mean `mu` and variance `s2` (symmetric boundary), and noise
/// power `nu` taken as the mean local variance over the image, each pixel
/// becomes `mu + max(s2 - nu, 0) / max(s2, nu) * (x - mu)`.
pub fn wiener_smooth(image: &Tensor<f64>, window: usize) -> Result<Tensor<f64>> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::config(format!(
            "Wiener window must be odd and at least 3, got {window}"
        )));
    }
    let (h, w, c) = image.dims3()?;
    if c != 1 {
        return Err(Error::dim(format!("expected one channel, got {c}")));
    }
    let half = (window / 2) as isize;
    let area = (window * window) as f64;
    let x = image.data();
    let mut mean = vec![0.0; h * w];
    let mut var = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let (mut s, mut s2) = (0.0, 0.0);
            for di in -half..=half {
                let r = symmetric_index(i as isize + di, h);
                for dj in -half..=half {
                    let v = x[r * w + symmetric_index(j as isize + dj, w)];
                    s += v;
                    s2 += v * v;
                }
            }
            let mu = s / area;
            mean[i * w + j] = mu;
            var[i * w + j] = s2 / area - mu * mu;
        }
    }
    let noise = var.iter().sum::<f64>() / var.len() as f64;
    let data = x
        .iter()
        .zip(mean.iter().zip(&var))
        .map(|(&v, (&mu, &s2))| {
            let denom = s2.max(noise);
            if denom > 0.0 {
                mu + (s2 - noise).max(0.0) / denom * (v - mu)
            } else {
                mu
            }
        })
        .collect();
    Tensor::new(image.shape(), data)
}
