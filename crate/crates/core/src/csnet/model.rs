use rand::Rng;

use super::CsNetConfig;
use crate::bcs_spl::{MeasurementMatrix, ReconstructionMatrix};
use crate::error::{Error, Result};
use crate::layout::{combine, pad_symmetric, pad_symmetric_backward, split_blocks, Padding};
use crate::netcore::{
    conv2d_backward, conv2d_forward, he_init, mse_loss, relu_backward, relu_forward, seeded_rng, ConvSpec, Real,
    Tensor,
};

/// One refinement convolution with its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepLayer<T: Real> {
    pub filters: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Learned parameters of the three sub-networks.
///
/// * `sampling_filters` `[B, B, 1, n_B]`: the measurement matrix, one filter
///   per row, applied with stride `B` and no bias.
/// * `init_filters` `[1, 1, n_B, B^2]`: the linear initial estimator, no bias.
/// * `deep_layers`: `f x f` convolutions `1 -> d -> ... -> d -> 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsNetModel<T: Real = f32> {
    config: CsNetConfig,
    pub sampling_filters: Tensor<T>,
    pub init_filters: Tensor<T>,
    pub deep_layers: Vec<DeepLayer<T>>,
}

/// Intermediate results of [`forward`].
#[derive(Debug, Clone)]
pub struct Forward<T: Real> {
    /// `[H/B, W/B, n_B]`
    pub measurements: Tensor<T>,
    pub initial: Tensor<T>,
    pub final_image: Tensor<T>,
}

impl<T: Real> CsNetModel<T> {
    /// Assembles a model from explicit tensors, checking every shape.
    pub fn from_parts(
        config: CsNetConfig,
        sampling_filters: Tensor<T>,
        init_filters: Tensor<T>,
        deep_layers: Vec<DeepLayer<T>>,
    ) -> Result<Self> {
        config.validate()?;
        let model = Self {
            config,
            sampling_filters,
            init_filters,
            deep_layers,
        };
        let shapes = model.parameter_shapes();
        let actual: Vec<&[usize]> = model.parameters().iter().map(|t| t.shape()).collect();
        if actual.len() != shapes.len() {
            return Err(Error::dim(format!(
                "expected {} deep layers, got {}",
                model.config.deep_depth,
                model.deep_layers.len()
            )));
        }
        for (k, (want, got)) in shapes.iter().zip(actual).enumerate() {
            if want.as_slice() != got {
                return Err(Error::dim(format!(
                    "parameter {k} has shape {got:?}, expected {want:?}"
                )));
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &CsNetConfig {
        &self.config
    }

    pub fn set_final_relu(&mut self, on: bool) {
        self.config.final_relu = on;
    }

    /// `n_B`.
    pub fn measurements(&self) -> usize {
        self.config.measurements()
    }

    pub fn sampling_spec(&self) -> ConvSpec {
        let b = self.config.block_size;
        ConvSpec::new(b, b, 1, self.measurements()).with_stride(b, b)
    }

    pub fn init_spec(&self) -> ConvSpec {
        let b = self.config.block_size;
        ConvSpec::new(1, 1, self.measurements(), b * b)
    }

    /// Spec of refinement layer `k` (0-based).
    pub fn deep_spec(&self, k: usize) -> ConvSpec {
        let (m, d, f) = (self.config.deep_depth, self.config.deep_width, self.config.deep_filter);
        let cin = if k == 0 { 1 } else { d };
        let cout = if k + 1 == m { 1 } else { d };
        ConvSpec::new(f, f, cin, cout).with_bias()
    }

    /// Shapes of [`parameters`](Self::parameters), in the same order.
    pub fn parameter_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = vec![
            self.sampling_spec().filter_shape().to_vec(),
            self.init_spec().filter_shape().to_vec(),
        ];
        for k in 0..self.config.deep_depth {
            let spec = self.deep_spec(k);
            shapes.push(spec.filter_shape().to_vec());
            shapes.push(vec![spec.out_channels]);
        }
        shapes
    }

    /// Every tensor in canonical order: sampling, initial, then filters and
    /// bias of each refinement layer.
    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut out = vec![&self.sampling_filters, &self.init_filters];
        for layer in &self.deep_layers {
            out.push(&layer.filters);
            out.push(&layer.bias);
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.sampling_filters, &mut self.init_filters];
        for layer in &mut self.deep_layers {
            out.push(&mut layer.filters);
            out.push(&mut layer.bias);
        }
        out
    }

    pub fn cast<U: Real>(&self) -> CsNetModel<U> {
        CsNetModel {
            config: self.config.clone(),
            sampling_filters: self.sampling_filters.cast(),
            init_filters: self.init_filters.cast(),
            deep_layers: self
                .deep_layers
                .iter()
                .map(|l| DeepLayer {
                    filters: l.filters.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
        }
    }

    /// The sampling layer as an `n_B x B^2` matrix; row `k` is filter `k`
    /// flattened row-major.
    pub fn export_sampling_matrix(&self) -> MeasurementMatrix {
        let (b, nb) = (self.config.block_size, self.measurements());
        let w = self.sampling_filters.data();
        let mut entries = Vec::with_capacity(nb * b * b);
        for k in 0..nb {
            entries.extend((0..b * b).map(|p| w[p * nb + k].f64()));
        }
        MeasurementMatrix::new(b, nb, entries).expect("model shapes are validated")
    }

    /// Replaces the sampling layer with `phi`.
    pub fn import_sampling_matrix(&mut self, phi: &MeasurementMatrix) -> Result<()> {
        let (b, nb) = (self.config.block_size, self.measurements());
        if phi.block_size() != b || phi.rows() != nb {
            return Err(Error::dim(format!(
                "matrix is {}x{} for B = {}, model needs {nb}x{} for B = {b}",
                phi.rows(),
                phi.cols(),
                phi.block_size(),
                b * b
            )));
        }
        let w = self.sampling_filters.data_mut();
        for k in 0..nb {
            for (p, &v) in phi.row(k).iter().enumerate() {
                w[p * nb + k] = T::of(v);
            }
        }
        Ok(())
    }

    /// Replaces the initial reconstruction layer with a `B^2 x n_B` estimator.
    pub fn import_init_matrix(&mut self, phi_tilde: &ReconstructionMatrix) -> Result<()> {
        let (b, nb) = (self.config.block_size, self.measurements());
        if phi_tilde.block_size() != b || phi_tilde.measurements() != nb {
            return Err(Error::dim(format!(
                "estimator is for B = {} with {} measurements, model has B = {b}, n_B = {nb}",
                phi_tilde.block_size(),
                phi_tilde.measurements()
            )));
        }
        let n = b * b;
        let w = self.init_filters.data_mut();
        for (o, row) in phi_tilde.entries().chunks_exact(nb).enumerate() {
            for (c, &v) in row.iter().enumerate() {
                w[c * n + o] = T::of(v);
            }
        }
        Ok(())
    }

    fn relu_after(&self, k: usize) -> bool {
        k + 1 < self.config.deep_depth || self.config.final_relu
    }

    fn deep_padding(&self) -> Padding {
        Padding::uniform((self.config.deep_filter - 1) / 2)
    }
}

/// He-initialized model; draws sampling, initial and refinement filters in
/// that order from a generator seeded with `config.seed`. Biases start at 0.
pub fn build_model<T: Real>(config: &CsNetConfig) -> Result<CsNetModel<T>> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed);
    build_model_with(config, &mut rng)
}

pub fn build_model_with<T: Real, R: Rng>(config: &CsNetConfig, rng: &mut R) -> Result<CsNetModel<T>> {
    config.validate()?;
    let mut model = CsNetModel {
        config: config.clone(),
        sampling_filters: Tensor::zeros(&[1]),
        init_filters: Tensor::zeros(&[1]),
        deep_layers: Vec::new(),
    };
    let spec = model.sampling_spec();
    model.sampling_filters = he_init(&spec.filter_shape(), spec.fan_in(), rng);
    let spec = model.init_spec();
    model.init_filters = he_init(&spec.filter_shape(), spec.fan_in(), rng);
    for k in 0..config.deep_depth {
        let spec = model.deep_spec(k);
        model.deep_layers.push(DeepLayer {
            filters: he_init(&spec.filter_shape(), spec.fan_in(), rng),
            bias: Tensor::zeros(&[spec.out_channels]),
        });
    }
    Ok(model)
}

/// Block measurements `[H/B, W/B, n_B]` of a single-channel image.
pub fn sample<T: Real>(model: &CsNetModel<T>, image: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, c) = image.dims3()?;
    let b = model.config.block_size;
    if c != 1 {
        return Err(Error::dim(format!("expected one channel, got {c}")));
    }
    if h % b != 0 || w % b != 0 {
        return Err(Error::geometry(format!(
            "{h}x{w} image is not a multiple of the {b}x{b} block"
        )));
    }
    conv2d_forward(image, &model.sampling_spec(), &model.sampling_filters, None)
}

/// Linear estimate: per-block `B^2` vectors, reshaped and tiled.
pub fn initial_reconstruct<T: Real>(model: &CsNetModel<T>, measurements: &Tensor<T>) -> Result<Tensor<T>> {
    let blocks = conv2d_forward(measurements, &model.init_spec(), &model.init_filters, None)?;
    combine(&blocks, model.config.block_size)
}

/// Size-preserving refinement stack.
pub fn deep_reconstruct<T: Real>(model: &CsNetModel<T>, initial: &Tensor<T>) -> Result<Tensor<T>> {
    let pad = model.deep_padding();
    let mut x = initial.clone();
    for (k, layer) in model.deep_layers.iter().enumerate() {
        let padded = pad_symmetric(&x, pad)?;
        x = conv2d_forward(&padded, &model.deep_spec(k), &layer.filters, Some(&layer.bias))?;
        if model.relu_after(k) {
            x = relu_forward(&x);
        }
    }
    Ok(x)
}

pub fn forward<T: Real>(model: &CsNetModel<T>, image: &Tensor<T>) -> Result<Forward<T>> {
    let measurements = sample(model, image)?;
    let initial = initial_reconstruct(model, &measurements)?;
    let final_image = deep_reconstruct(model, &initial)?;
    Ok(Forward {
        measurements,
        initial,
        final_image,
    })
}

/// Loss contribution of one image in a batch of `batch_count` and the
/// gradients of that contribution, in [`CsNetModel::parameters`] order.
///
/// The image is its own target.
pub fn loss_and_gradients<T: Real>(
    model: &CsNetModel<T>,
    image: &Tensor<T>,
    batch_count: usize,
) -> Result<(f64, Vec<Tensor<T>>)> {
    let b = model.config.block_size;
    let pad = model.deep_padding();
    let measurements = sample(model, image)?;
    let initial = initial_reconstruct(model, &measurements)?;

    // forward through the stack, keeping each layer's padded input and
    // pre-activation output
    let mut padded_inputs = Vec::with_capacity(model.deep_layers.len());
    let mut pre_activations = Vec::with_capacity(model.deep_layers.len());
    let mut x = initial;
    for (k, layer) in model.deep_layers.iter().enumerate() {
        let padded = pad_symmetric(&x, pad)?;
        let z = conv2d_forward(&padded, &model.deep_spec(k), &layer.filters, Some(&layer.bias))?;
        x = if model.relu_after(k) { relu_forward(&z) } else { z.clone() };
        padded_inputs.push(padded);
        pre_activations.push(z);
    }
    let (loss, mut grad) = mse_loss(&x, image, batch_count)?;

    let (h, w, _) = image.dims3()?;
    let mut deep_grads = Vec::with_capacity(2 * model.deep_layers.len());
    for k in (0..model.deep_layers.len()).rev() {
        if model.relu_after(k) {
            grad = relu_backward(&grad, &pre_activations[k])?;
        }
        let g = conv2d_backward(&grad, &padded_inputs[k], &model.deep_spec(k), &model.deep_layers[k].filters)?;
        deep_grads.push(g.bias.expect("refinement layers have biases"));
        deep_grads.push(g.filters);
        grad = pad_symmetric_backward(&g.input, pad, h, w)?;
    }

    let grad_blocks = split_blocks(&grad, b)?;
    let g_init = conv2d_backward(&grad_blocks, &measurements, &model.init_spec(), &model.init_filters)?;
    let g_sample = conv2d_backward(&g_init.input, image, &model.sampling_spec(), &model.sampling_filters)?;

    let mut grads = vec![g_sample.filters, g_init.filters];
    grads.extend(deep_grads.into_iter().rev());
    Ok((loss, grads))
}
