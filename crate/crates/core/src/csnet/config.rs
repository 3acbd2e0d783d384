use crate::error::{Error, Result};

/// Architecture and seed of a CSNet model.
#[derive(Debug, Clone, PartialEq)]
pub struct CsNetConfig {
    /// Block size `B`; sampling is non-overlapping over `B x B` blocks.
    pub block_size: usize,
    /// Sampling ratio in `(0, 1]`.
    pub sampling_ratio: f64,
    /// Total number of layers `m` in the refinement stack.
    pub deep_depth: usize,
    /// Feature maps `d` of the hidden refinement layers.
    pub deep_width: usize,
    /// Odd filter size `f` of the refinement layers.
    pub deep_filter: usize,
    /// Apply ReLU after the last refinement layer too.
    pub final_relu: bool,
    pub seed: u64,
}

impl Default for CsNetConfig {
    fn default() -> Self {
        Self {
            block_size: 32,
            sampling_ratio: 0.1,
            deep_depth: 5,
            deep_width: 64,
            deep_filter: 3,
            final_relu: false,
            seed: 0,
        }
    }
}

impl CsNetConfig {
    /// Measurements per block, `floor(r B^2)`.
    ///
    /// A tolerance of 1e-9 absorbs representation error in ratios such as
    /// 0.29, whose product with 100 is 28.999999999999996.
    pub fn measurements(&self) -> usize {
        (self.sampling_ratio * (self.block_size * self.block_size) as f64 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size < 2 {
            return Err(Error::config(format!(
                "block size must be at least 2, got {}",
                self.block_size
            )));
        }
        if !(self.sampling_ratio > 0.0 && self.sampling_ratio <= 1.0) {
            return Err(Error::config(format!(
                "sampling ratio must lie in (0, 1], got {}",
                self.sampling_ratio
            )));
        }
        if self.measurements() < 1 {
            return Err(Error::config(format!(
                "ratio {} gives no measurements for {}x{} blocks",
                self.sampling_ratio, self.block_size, self.block_size
            )));
        }
        if self.deep_depth < 1 || self.deep_width < 1 {
            return Err(Error::config("deep stack needs at least one layer and one filter"));
        }
        if self.deep_filter % 2 == 0 {
            return Err(Error::config(format!(
                "deep filter size must be odd, got {}",
                self.deep_filter
            )));
        }
        Ok(())
    }
}
