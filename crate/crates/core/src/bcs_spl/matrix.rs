use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::netcore::GaussianSampler;

const CSMX_MAGIC: &[u8; 4] = b"CSMX";
const CSMX_VERSION: u32 = 1;

/// Row-major `n_B x B^2` block measurement matrix.
///
/// Column `r * B + c` multiplies pixel `(r, c)` of a block.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    block_size: usize,
    rows: usize,
    entries: Vec<f64>,
}

impl MeasurementMatrix {
    pub fn new(block_size: usize, rows: usize, entries: Vec<f64>) -> Result<Self> {
        let cols = block_size * block_size;
        if block_size == 0 || rows == 0 || rows > cols {
            return Err(Error::config(format!(
                "need 1 <= n_B <= B^2, got n_B = {rows} with B = {block_size}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::dim(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self {
            block_size,
            rows,
            entries,
        })
    }

    pub fn identity(block_size: usize) -> Self {
        let n = block_size * block_size;
        let mut entries = vec![0.0; n * n];
        for k in 0..n {
            entries[k * n + k] = 1.0;
        }
        Self::new(block_size, n, entries).expect("square identity is valid")
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// `n_B`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// `B^2`.
    pub fn cols(&self) -> usize {
        self.block_size * self.block_size
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.cols();
        &self.entries[k * n..(k + 1) * n]
    }

    /// `Phi x` for one flattened block.
    pub fn apply(&self, block: &[f64]) -> Vec<f64> {
        debug_assert_eq!(block.len(), self.cols());
        (0..self.rows)
            .map(|k| self.row(k).iter().zip(block).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Phi^T y` for one block's measurements.
    pub fn apply_transpose(&self, measurements: &[f64]) -> Vec<f64> {
        debug_assert_eq!(measurements.len(), self.rows);
        let mut out = vec![0.0; self.cols()];
        for (k, &y) in measurements.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(k)) {
                *o += a * y;
            }
        }
        out
    }

    /// Largest `|(Phi Phi^T)_{ij} - delta_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.rows {
                let dot: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn write_csmx(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(CSMX_MAGIC)?;
        out.write_all(&CSMX_VERSION.to_le_bytes())?;
        out.write_all(&(self.rows as u32).to_le_bytes())?;
        out.write_all(&(self.cols() as u32).to_le_bytes())?;
        for v in &self.entries {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Parses a CSMX stream; `name` labels format errors.
    pub fn read_csmx(mut input: impl Read, name: &str) -> Result<Self> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(name, e))?;
        let bad = |msg: String| Error::format(name, msg);
        if bytes.len() < 16 {
            return Err(bad("file shorter than the 16-byte header".into()));
        }
        if &bytes[0..4] != CSMX_MAGIC {
            return Err(bad("magic: expected \"CSMX\"".into()));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = word(4);
        if version != CSMX_VERSION {
            return Err(bad(format!("version: unsupported value {version}")));
        }
        let (rows, cols) = (word(8) as usize, word(12) as usize);
        let block_size = (cols as f64).sqrt().round() as usize;
        if block_size * block_size != cols || cols == 0 {
            return Err(bad(format!("B^2: {cols} is not a positive perfect square")));
        }
        if rows == 0 || rows > cols {
            return Err(bad(format!("n_B: {rows} is outside 1..={cols}")));
        }
        let expected = 16 + rows * cols * 8;
        if bytes.len() != expected {
            return Err(bad(format!(
                "entries: expected {} bytes of payload, found {}",
                expected - 16,
                bytes.len() - 16
            )));
        }
        let entries = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(block_size, rows, entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + self.entries.len() * 8);
        self.write_csmx(&mut buf).expect("writing to memory");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csmx(std::io::BufReader::new(file), &path.display().to_string())
    }
}

/// `n_B x B^2` matrix of i.i.d. standard normal entries, optionally with its
/// rows replaced by an orthonormal basis of their span.
pub fn make_gaussian_matrix<R: Rng>(
    rows: usize,
    block_size: usize,
    rng: &mut R,
    orthonormalize: bool,
) -> Result<MeasurementMatrix> {
    let cols = block_size * block_size;
    if rows == 0 || rows > cols {
        return Err(Error::config(format!(
            "n_B = {rows} must lie in 1..={cols} for block size {block_size}"
        )));
    }
    let mut sampler = GaussianSampler::new(rng);
    let mut entries: Vec<f64> = (0..rows * cols).map(|_| sampler.next_standard()).collect();
    if orthonormalize {
        gram_schmidt(&mut entries, rows, cols)?;
    }
    MeasurementMatrix::new(block_size, rows, entries)
}

/// Modified Gram–Schmidt with one full re-orthogonalization pass.
fn gram_schmidt(a: &mut [f64], rows: usize, cols: usize) -> Result<()> {
    for i in 0..rows {
        let (done, rest) = a.split_at_mut(i * cols);
        let row = &mut rest[..cols];
        let original: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        for _pass in 0..2 {
            for j in 0..i {
                let q = &done[j * cols..(j + 1) * cols];
                let dot: f64 = q.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
                for (r, &qv) in row.iter_mut().zip(q) {
                    *r -= dot * qv;
                }
            }
        }
        let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-10 * original.max(f64::MIN_POSITIVE)) {
            return Err(Error::Numerical(format!(
                "row {i} is linearly dependent on the previous rows"
            )));
        }
        for r in row.iter_mut() {
            *r /= norm;
        }
    }
    Ok(())
}
