use super::Real;
use crate::error::{Error, Result};

/// Dense row-major array with shape metadata.
///
/// Images and feature maps are `[height, width, channels]` with the channel
/// index innermost; batches prepend a leading extent. Filters are
/// `[filter_height, filter_width, in_channels, out_channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Real = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        check_shape(shape)?;
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} holds {len} elements but {} were supplied",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// # Panics
    /// If any extent is zero.
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    /// # Panics
    /// If any extent is zero.
    pub fn filled(shape: &[usize], value: T) -> Self {
        check_shape(shape).expect("invalid tensor shape");
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    /// Builds a tensor by evaluating `f` on each flat index in order.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Self {
        check_shape(shape).expect("invalid tensor shape");
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..len).map(f).collect(),
        }
    }

    /// Single-channel `[H, W, 1]` image from row-major rows.
    pub fn image(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        Self::new(&[height, width, 1], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Extents of a rank-3 tensor as `(height, width, channels)`.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(Error::dim(format!(
                "expected a [H, W, C] tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    #[inline]
    pub fn at3(&self, i: usize, j: usize, c: usize) -> T {
        let (w, ch) = (self.shape[1], self.shape[2]);
        self.data[(i * w + j) * ch + c]
    }

    #[inline]
    pub fn at3_mut(&mut self, i: usize, j: usize, c: usize) -> &mut T {
        let (w, ch) = (self.shape[1], self.shape[2]);
        &mut self.data[(i * w + j) * ch + c]
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    pub fn ensure_same_shape(&self, other: &Tensor<T>, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim(format!(
                "{what}: shape {:?} does not match {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// `self += other` elementwise.
    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        self.ensure_same_shape(other, "add")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    /// Item `index` along the leading axis, e.g. one image of a batch.
    pub fn outer(&self, index: usize) -> Result<Tensor<T>> {
        if self.shape.len() < 2 || index >= self.shape[0] {
            return Err(Error::dim(format!(
                "cannot take item {index} of shape {:?}",
                self.shape
            )));
        }
        let inner: usize = self.shape[1..].iter().product();
        Tensor::new(
            &self.shape[1..],
            self.data[index * inner..(index + 1) * inner].to_vec(),
        )
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor<T>]) -> Result<Tensor<T>> {
        let first = items
            .first()
            .ok_or_else(|| Error::dim("cannot stack an empty list"))?;
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        let mut data = Vec::with_capacity(items.len() * first.len());
        for item in items {
            first.ensure_same_shape(item, "stack")?;
            data.extend_from_slice(&item.data);
        }
        Tensor::new(&shape, data)
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> Result<f64> {
        self.ensure_same_shape(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.f64() - b.f64()).abs())
            .fold(0.0, f64::max))
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::dim(format!(
            "tensor extents must all be at least 1, got {shape:?}"
        )));
    }
    Ok(())
}
