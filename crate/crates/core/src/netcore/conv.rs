//! Valid-padding 2-D convolution (cross-correlation) via im2col and GEMM.

use super::real::{gemm, MatRef};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Geometry of one convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub filter_height: usize,
    pub filter_width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub has_bias: bool,
}

impl ConvSpec {
    /// Stride-1, bias-free layer.
    pub fn new(filter_height: usize, filter_width: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            filter_height,
            filter_width,
            in_channels,
            out_channels,
            stride_h: 1,
            stride_w: 1,
            has_bias: false,
        }
    }

    pub fn with_stride(mut self, stride_h: usize, stride_w: usize) -> Self {
        self.stride_h = stride_h;
        self.stride_w = stride_w;
        self
    }

    pub fn with_bias(mut self) -> Self {
        self.has_bias = true;
        self
    }

    pub fn filter_shape(&self) -> [usize; 4] {
        [self.filter_height, self.filter_width, self.in_channels, self.out_channels]
    }

    /// Number of inputs feeding each output element.
    pub fn fan_in(&self) -> usize {
        self.filter_height * self.filter_width * self.in_channels
    }

    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        if self.stride_h == 0 || self.stride_w == 0 {
            return Err(Error::geometry("stride must be at least 1"));
        }
        if height < self.filter_height || width < self.filter_width {
            return Err(Error::geometry(format!(
                "input {height}x{width} is smaller than the {}x{} filter",
                self.filter_height, self.filter_width
            )));
        }
        let (dh, dw) = (height - self.filter_height, width - self.filter_width);
        if dh % self.stride_h != 0 || dw % self.stride_w != 0 {
            return Err(Error::geometry(format!(
                "input {height}x{width} does not tile with filter {}x{} at stride {}x{}",
                self.filter_height, self.filter_width, self.stride_h, self.stride_w
            )));
        }
        Ok((dh / self.stride_h + 1, dw / self.stride_w + 1))
    }

    fn check_operands<T: Real>(
        &self,
        input: &Tensor<T>,
        filters: &Tensor<T>,
    ) -> Result<(usize, usize, usize, usize)> {
        let (h, w, c) = input.dims3()?;
        if c != self.in_channels {
            return Err(Error::dim(format!(
                "input has {c} channels, layer expects {}",
                self.in_channels
            )));
        }
        if filters.shape() != self.filter_shape() {
            return Err(Error::dim(format!(
                "filters have shape {:?}, layer expects {:?}",
                filters.shape(),
                self.filter_shape()
            )));
        }
        let (ho, wo) = self.output_dims(h, w)?;
        Ok((h, w, ho, wo))
    }
}

/// Target size of one band's patch matrix, in elements.
const BAND_ELEMENTS: usize = 1 << 17;

fn im2col<T: Real>(input: &Tensor<T>, spec: &ConvSpec, ho: usize, wo: usize) -> Vec<T> {
    let k = spec.fan_in();
    let mut cols = vec![T::zero(); ho * wo * k];
    im2col_rows(input, spec, 0..ho, wo, &mut cols);
    cols
}

/// Patch rows for output rows `rows`, written to the front of `cols`.
fn im2col_rows<T: Real>(input: &Tensor<T>, spec: &ConvSpec, rows: std::ops::Range<usize>, wo: usize, cols: &mut [T]) {
    let (_, w, c) = input.dims3().expect("checked by caller");
    let k = spec.fan_in();
    let src = input.data();
    let len = spec.filter_width * c;
    for (r, i) in rows.enumerate() {
        for j in 0..wo {
            let row = &mut cols[(r * wo + j) * k..(r * wo + j + 1) * k];
            for a in 0..spec.filter_height {
                let y = i * spec.stride_h + a;
                let start = (y * w + j * spec.stride_w) * c;
                row[a * len..(a + 1) * len].copy_from_slice(&src[start..start + len]);
            }
        }
    }
}

fn col2im<T: Real>(cols: &[T], spec: &ConvSpec, h: usize, w: usize, ho: usize, wo: usize) -> Tensor<T> {
    let c = spec.in_channels;
    let k = spec.fan_in();
    let mut out = Tensor::zeros(&[h, w, c]);
    let dst = out.data_mut();
    for i in 0..ho {
        for j in 0..wo {
            let row = &cols[(i * wo + j) * k..(i * wo + j + 1) * k];
            for a in 0..spec.filter_height {
                let y = i * spec.stride_h + a;
                let start = (y * w + j * spec.stride_w) * c;
                let len = spec.filter_width * c;
                for (d, &s) in dst[start..start + len].iter_mut().zip(&row[a * len..(a + 1) * len]) {
                    *d = *d + s;
                }
            }
        }
    }
    out
}

/// Applies `filters` to every valid window of `input`.
///
/// Output element `(i, j, o)` is the inner product of filter `o` with the
/// window whose top-left corner is `(i * stride_h, j * stride_w)`, plus
/// `bias[o]` when the layer has a bias.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    spec: &ConvSpec,
    filters: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let (_, _, ho, wo) = spec.check_operands(input, filters)?;
    check_bias(spec, bias)?;
    let cout = spec.out_channels;
    if cout < NARROW_OUTPUT && spec.stride_h == 1 && spec.stride_w == 1 {
        return narrow_forward(input, spec, filters, bias, ho, wo);
    }
    let k = spec.fan_in();
    let mut out = vec![T::zero(); ho * wo * cout];
    let beta = match bias {
        Some(b) => {
            for row in out.chunks_exact_mut(cout) {
                row.copy_from_slice(b.data());
            }
            T::one()
        }
        None => T::zero(),
    };
    // whole-image patch matrices run to hundreds of MB; bands of output rows
    // keep each one cache-sized
    let band = (BAND_ELEMENTS / (wo * k).max(1)).clamp(1, ho);
    let mut cols = vec![T::zero(); band * wo * k];
    for first in (0..ho).step_by(band) {
        let rows = band.min(ho - first);
        im2col_rows(input, spec, first..first + rows, wo, &mut cols);
        gemm(
            MatRef::new(&cols[..rows * wo * k], rows * wo, k),
            MatRef::new(filters.data(), k, cout),
            beta,
            &mut out[first * wo * cout..(first + rows) * wo * cout],
        );
    }
    Tensor::new(&[ho, wo, cout], out)
}

/// Below this many output channels a GEMM against the filter matrix is
/// mostly padding; [`narrow_forward`] is used instead.
const NARROW_OUTPUT: usize = 4;

/// Stride-1 convolution with few outputs: one GEMM produces every tap's
/// response at every input pixel, then shifted tap planes are summed.
fn narrow_forward<T: Real>(
    input: &Tensor<T>,
    spec: &ConvSpec,
    filters: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    ho: usize,
    wo: usize,
) -> Result<Tensor<T>> {
    let (h, w, cin) = input.dims3()?;
    let cout = spec.out_channels;
    let taps = spec.filter_height * spec.filter_width;
    let n = taps * cout;
    // per_tap[c][t * cout + o] = filters[t][c][o]
    let f = filters.data();
    let mut per_tap = vec![T::zero(); cin * n];
    for t in 0..taps {
        for c in 0..cin {
            for o in 0..cout {
                per_tap[c * n + t * cout + o] = f[(t * cin + c) * cout + o];
            }
        }
    }
    let mut responses = vec![T::zero(); h * w * n];
    gemm(
        MatRef::new(input.data(), h * w, cin),
        MatRef::new(&per_tap, cin, n),
        T::zero(),
        &mut responses,
    );
    let mut out = vec![T::zero(); ho * wo * cout];
    for i in 0..ho {
        for j in 0..wo {
            let dst = &mut out[(i * wo + j) * cout..(i * wo + j + 1) * cout];
            if let Some(b) = bias {
                dst.copy_from_slice(b.data());
            }
            for a in 0..spec.filter_height {
                for b in 0..spec.filter_width {
                    let t = a * spec.filter_width + b;
                    let src = ((i + a) * w + j + b) * n + t * cout;
                    for (d, &r) in dst.iter_mut().zip(&responses[src..src + cout]) {
                        *d = *d + r;
                    }
                }
            }
        }
    }
    Tensor::new(&[ho, wo, cout], out)
}

fn check_bias<T: Real>(spec: &ConvSpec, bias: Option<&Tensor<T>>) -> Result<()> {
    match (spec.has_bias, bias) {
        (true, Some(b)) if b.shape() == [spec.out_channels] => Ok(()),
        (true, Some(b)) => Err(Error::dim(format!(
            "bias has shape {:?}, layer expects [{}]",
            b.shape(),
            spec.out_channels
        ))),
        (true, None) => Err(Error::dim("layer has a bias but none was supplied")),
        (false, Some(_)) => Err(Error::dim("bias supplied to a bias-free layer")),
        (false, None) => Ok(()),
    }
}

/// Gradients of a scalar loss with respect to the operands of one convolution.
#[derive(Debug, Clone)]
pub struct ConvGrads<T: Real> {
    pub input: Tensor<T>,
    pub filters: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

/// Backpropagates `grad_out` (the loss gradient at the layer output) through
/// [`conv2d_forward`].
pub fn conv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    spec: &ConvSpec,
    filters: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (h, w, ho, wo) = spec.check_operands(input, filters)?;
    let cout = spec.out_channels;
    if grad_out.shape() != [ho, wo, cout] {
        return Err(Error::dim(format!(
            "upstream gradient has shape {:?}, layer output is [{ho}, {wo}, {cout}]",
            grad_out.shape()
        )));
    }
    let k = spec.fan_in();
    let g = MatRef::new(grad_out.data(), ho * wo, cout);
    let cols = im2col(input, spec, ho, wo);

    let mut grad_filters = vec![T::zero(); k * cout];
    gemm(MatRef::new(&cols, ho * wo, k).t(), g, T::zero(), &mut grad_filters);

    let mut grad_cols = cols;
    gemm(g, MatRef::new(filters.data(), k, cout).t(), T::zero(), &mut grad_cols);
    let grad_input = col2im(&grad_cols, spec, h, w, ho, wo);

    let grad_bias = spec.has_bias.then(|| {
        let mut sums = vec![T::zero(); cout];
        for row in grad_out.data().chunks_exact(cout) {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s = *s + v;
            }
        }
        Tensor::new(&[cout], sums).expect("cout >= 1")
    });

    Ok(ConvGrads {
        input: grad_input,
        filters: Tensor::new(&spec.filter_shape(), grad_filters)?,
        bias: grad_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{finite_diff_grad, max_relative_error, seeded_rng, uniform_tensor};

    /// Direct quadruple loop, independent of im2col.
    fn naive_conv(input: &Tensor<f64>, spec: &ConvSpec, filters: &Tensor<f64>, bias: Option<&Tensor<f64>>) -> Tensor<f64> {
        let (h, w, _) = input.dims3().unwrap();
        let ho = (h - spec.filter_height) / spec.stride_h + 1;
        let wo = (w - spec.filter_width) / spec.stride_w + 1;
        let mut out = Tensor::zeros(&[ho, wo, spec.out_channels]);
        let f = filters.data();
        for i in 0..ho {
            for j in 0..wo {
                for o in 0..spec.out_channels {
                    let mut acc = bias.map_or(0.0, |b| b.data()[o]);
                    for a in 0..spec.filter_height {
                        for b in 0..spec.filter_width {
                            for c in 0..spec.in_channels {
                                let wgt = f[((a * spec.filter_width + b) * spec.in_channels + c) * spec.out_channels + o];
                                acc += wgt * input.at3(i * spec.stride_h + a, j * spec.stride_w + b, c);
                            }
                        }
                    }
                    *out.at3_mut(i, j, o) = acc;
                }
            }
        }
        out
    }

    #[test]
    fn sum_filter_on_two_by_two() {
        let x = Tensor::image(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let spec = ConvSpec::new(2, 2, 1, 1).with_stride(2, 2);
        let y = conv2d_forward(&x, &spec, &Tensor::filled(&[2, 2, 1, 1], 1.0), None).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn unit_filter_is_identity() {
        let mut rng = seeded_rng(1);
        let x = uniform_tensor::<f64>(&[4, 4, 1], &mut rng);
        let y = conv2d_forward(&x, &ConvSpec::new(1, 1, 1, 1), &Tensor::filled(&[1, 1, 1, 1], 1.0), None).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = seeded_rng(2);
        let x = uniform_tensor::<f64>(&[3, 3, 1], &mut rng);
        let spec = ConvSpec::new(2, 2, 1, 1);
        let f = uniform_tensor::<f64>(&spec.filter_shape(), &mut rng);
        let y = conv2d_forward(&x, &spec, &f, None).unwrap();
        assert_eq!(y.shape(), &[2, 2, 1]);
        assert!(y.max_abs_diff(&naive_conv(&x, &spec, &f, None)).unwrap() < 1e-12);

        // multi-channel, strided, biased
        let x = uniform_tensor::<f64>(&[7, 9, 3], &mut rng);
        let spec = ConvSpec::new(3, 3, 3, 5).with_stride(2, 3).with_bias();
        let f = uniform_tensor::<f64>(&spec.filter_shape(), &mut rng);
        let b = uniform_tensor::<f64>(&[5], &mut rng);
        let y = conv2d_forward(&x, &spec, &f, Some(&b)).unwrap();
        assert!(y.max_abs_diff(&naive_conv(&x, &spec, &f, Some(&b))).unwrap() < 1e-12);
    }

    #[test]
    fn narrow_and_banded_paths_match_direct_summation() {
        let mut rng = seeded_rng(3);
        // 38 output rows of 48 x 144 patches span several bands
        let x = uniform_tensor::<f64>(&[40, 50, 16], &mut rng);
        for cout in [1, 2, 3, 4, 6] {
            for (fh, fw) in [(3, 3), (1, 3), (3, 5)] {
                let spec = ConvSpec::new(fh, fw, 16, cout).with_bias();
                let f = uniform_tensor::<f64>(&spec.filter_shape(), &mut rng);
                let b = uniform_tensor::<f64>(&[cout], &mut rng);
                let y = conv2d_forward(&x, &spec, &f, Some(&b)).unwrap();
                let err = y.max_abs_diff(&naive_conv(&x, &spec, &f, Some(&b))).unwrap();
                assert!(err < 1e-12, "cout {cout}, filter {fh}x{fw}: {err}");
                let spec = ConvSpec::new(fh, fw, 16, cout);
                let y = conv2d_forward(&x, &spec, &f, None).unwrap();
                assert!(y.max_abs_diff(&naive_conv(&x, &spec, &f, None)).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_geometry_and_channels() {
        let x = Tensor::<f64>::zeros(&[5, 5, 2]);
        let spec = ConvSpec::new(2, 2, 2, 1).with_stride(2, 2);
        let f = Tensor::zeros(&spec.filter_shape());
        assert!(matches!(conv2d_forward(&x, &spec, &f, None), Err(Error::Geometry(_))));
        let spec = ConvSpec::new(1, 1, 3, 1);
        let f = Tensor::zeros(&spec.filter_shape());
        assert!(matches!(conv2d_forward(&x, &spec, &f, None), Err(Error::Dimension(_))));
        let spec = ConvSpec::new(1, 1, 2, 1).with_bias();
        let f = Tensor::zeros(&spec.filter_shape());
        assert!(matches!(conv2d_forward(&x, &spec, &f, None), Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = seeded_rng(3);
        let x = uniform_tensor::<f64>(&[5, 5, 2], &mut rng);
        let spec = ConvSpec::new(3, 3, 2, 4).with_bias();
        let f = uniform_tensor::<f64>(&spec.filter_shape(), &mut rng);
        let g = conv2d_backward(&Tensor::zeros(&[3, 3, 4]), &x, &spec, &f).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.filters.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let (x, w, g) = (1.5, -0.75, 2.0);
        let spec = ConvSpec::new(1, 1, 1, 1);
        let grads = conv2d_backward(
            &Tensor::new(&[1, 1, 1], vec![g]).unwrap(),
            &Tensor::new(&[1, 1, 1], vec![x]).unwrap(),
            &spec,
            &Tensor::new(&[1, 1, 1, 1], vec![w]).unwrap(),
        )
        .unwrap();
        assert_eq!(grads.input.data(), &[w * g]);
        assert_eq!(grads.filters.data(), &[x * g]);
        assert!(grads.bias.is_none());
    }

    #[test]
    fn strided_gradients_match_finite_differences() {
        let mut rng = seeded_rng(4);
        let x = uniform_tensor::<f64>(&[5, 5, 1], &mut rng);
        let spec = ConvSpec::new(3, 3, 1, 2).with_stride(2, 2).with_bias();
        let f = uniform_tensor::<f64>(&spec.filter_shape(), &mut rng);
        let b = uniform_tensor::<f64>(&[2], &mut rng);
        // loss = sum(weights * output) so the upstream gradient is `probe`
        let probe = uniform_tensor::<f64>(&[2, 2, 2], &mut rng);
        let loss = |x: &Tensor<f64>, f: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            let y = conv2d_forward(x, &spec, f, Some(b)).unwrap();
            y.data().iter().zip(probe.data()).map(|(a, p)| a * p).sum()
        };
        let g = conv2d_backward(&probe, &x, &spec, &f).unwrap();
        let nx = finite_diff_grad(|t| loss(t, &f, &b), &x, 1e-6);
        let nf = finite_diff_grad(|t| loss(&x, t, &b), &f, 1e-6);
        let nb = finite_diff_grad(|t| loss(&x, &f, t), &b, 1e-6);
        assert!(max_relative_error(&g.input, &nx) < 1e-4);
        assert!(max_relative_error(&g.filters, &nf) < 1e-4);
        assert!(max_relative_error(g.bias.as_ref().unwrap(), &nb) < 1e-4);
    }
}
