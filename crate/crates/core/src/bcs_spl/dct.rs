use std::f64::consts::PI;

/// Orthonormal type-II 2-D DCT of square `B x B` blocks (row-major).
#[derive(Debug, Clone)]
pub struct Dct2 {
    size: usize,
    /// `basis[k * B + n] = alpha_k cos(pi (2n + 1) k / 2B)`
    basis: Vec<f64>,
}

impl Dct2 {
    pub fn new(size: usize) -> Self {
        assert!(size >= 1, "block size must be at least 1");
        let b = size as f64;
        let mut basis = Vec::with_capacity(size * size);
        for k in 0..size {
            let alpha = if k == 0 { (1.0 / b).sqrt() } else { (2.0 / b).sqrt() };
            for n in 0..size {
                basis.push(alpha * (PI * (2 * n + 1) as f64 * k as f64 / (2.0 * b)).cos());
            }
        }
        Self { size, basis }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `C X C^T`.
    pub fn forward(&self, block: &[f64]) -> Vec<f64> {
        self.sandwich(block, false)
    }

    /// `C^T Y C`.
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        self.sandwich(coeffs, true)
    }

    fn sandwich(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        let n = self.size;
        assert_eq!(x.len(), n * n, "block must be {n}x{n}");
        let c = |i: usize, j: usize| {
            if transpose {
                self.basis[j * n + i]
            } else {
                self.basis[i * n + j]
            }
        };
        // rows first: T = X M^T, then columns: Y = M T
        let mut tmp = vec![0.0; n * n];
        for r in 0..n {
            let row = &x[r * n..(r + 1) * n];
            for k in 0..n {
                tmp[r * n + k] = (0..n).map(|m| row[m] * c(k, m)).sum();
            }
        }
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            for col in 0..n {
                out[k * n + col] = (0..n).map(|m| c(k, m) * tmp[m * n + col]).sum();
            }
        }
        out
    }
}

pub fn dct2_forward(block: &[f64], size: usize) -> Vec<f64> {
    Dct2::new(size).forward(block)
}

pub fn dct2_inverse(coeffs: &[f64], size: usize) -> Vec<f64> {
    Dct2::new(size).inverse(coeffs)
}

/// Keeps entries with `|c| >= tau` and zeroes the rest.
pub fn hard_threshold(coeffs: &[f64], tau: f64) -> Vec<f64> {
    coeffs
        .iter()
        .map(|&c| if c.abs() >= tau { c } else { 0.0 })
        .collect()
}
