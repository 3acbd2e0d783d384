use proptest::prelude::*;

use super::*;

fn conv_case() -> impl Strategy<Value = (ConvSpec, usize, usize, u64)> {
    (1usize..=3, 1usize..=3, 1usize..=3, 1usize..=3, 1usize..=2, 1usize..=2, any::<bool>(), any::<u64>()).prop_flat_map(
        |(fh, fw, cin, cout, sh, sw, bias, seed)| {
            let mut spec = ConvSpec::new(fh, fw, cin, cout).with_stride(sh, sw);
            if bias {
                spec = spec.with_bias();
            }
            // output extents chosen so the input stays within 8x8
            let max_ho = (8 - fh) / sh + 1;
            let max_wo = (8 - fw) / sw + 1;
            (Just(spec), 1..=max_ho, 1..=max_wo, Just(seed))
        },
    )
    .prop_map(|(spec, ho, wo, seed)| {
        let h = (ho - 1) * spec.stride_h + spec.filter_height;
        let w = (wo - 1) * spec.stride_w + spec.filter_width;
        (spec, h, w, seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_is_linear_without_bias((spec, h, w, seed) in conv_case(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let spec = ConvSpec { has_bias: false, ..spec };
        let mut rng = seeded_rng(seed);
        let x = uniform_tensor::<f64>(&[h, w, spec.in_channels], &mut rng);
        let y = uniform_tensor::<f64>(&[h, w, spec.in_channels], &mut rng);
        let f = uniform_tensor::<f64>(&spec.filter_shape(), &mut rng);
        let mix = Tensor::from_fn(x.shape(), |k| a * x.data()[k] + b * y.data()[k]);
        let lhs = conv2d_forward(&mix, &spec, &f, None).unwrap();
        let fx = conv2d_forward(&x, &spec, &f, None).unwrap();
        let fy = conv2d_forward(&y, &spec, &f, None).unwrap();
        let rhs = Tensor::from_fn(fx.shape(), |k| a * fx.data()[k] + b * fy.data()[k]);
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-10);
    }

    #[test]
    fn conv_gradients_match_finite_differences((spec, h, w, seed) in conv_case()) {
        let mut rng = seeded_rng(seed);
        let x = uniform_tensor::<f64>(&[h, w, spec.in_channels], &mut rng);
        let f = uniform_tensor::<f64>(&spec.filter_shape(), &mut rng);
        let b = uniform_tensor::<f64>(&[spec.out_channels], &mut rng);
        let bias = |b: &Tensor<f64>| if spec.has_bias { Some(b.clone()) } else { None };
        let (ho, wo) = spec.output_dims(h, w).unwrap();
        let probe = uniform_tensor::<f64>(&[ho, wo, spec.out_channels], &mut rng);
        let loss = |x: &Tensor<f64>, f: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            let y = conv2d_forward(x, &spec, f, bias(b).as_ref()).unwrap();
            y.data().iter().zip(probe.data()).map(|(a, p)| a * p).sum()
        };
        let g = conv2d_backward(&probe, &x, &spec, &f).unwrap();
        prop_assert!(max_relative_error(&g.input, &finite_diff_grad(|t| loss(t, &f, &b), &x, 1e-6)) < 1e-4);
        prop_assert!(max_relative_error(&g.filters, &finite_diff_grad(|t| loss(&x, t, &b), &f, 1e-6)) < 1e-4);
        if spec.has_bias {
            let nb = finite_diff_grad(|t| loss(&x, &f, t), &b, 1e-6);
            prop_assert!(max_relative_error(g.bias.as_ref().unwrap(), &nb) < 1e-4);
        }
    }

    #[test]
    fn relu_is_idempotent(values in prop::collection::vec(-5.0f64..5.0, 1..64)) {
        let x = Tensor::new(&[values.len()], values).unwrap();
        let once = relu_forward(&x);
        prop_assert_eq!(relu_forward(&once), once);
    }

    #[test]
    fn mse_is_nonnegative_and_zero_only_on_equality(
        pairs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..32),
        n in 1usize..5,
    ) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let equal = p == t;
        let p = Tensor::new(&[p.len()], p).unwrap();
        let t = Tensor::new(&[t.len()], t).unwrap();
        let (loss, _) = mse_loss(&p, &t, n).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert_eq!(loss == 0.0, equal);
    }

    #[test]
    fn adam_with_zero_gradient_is_identity(values in prop::collection::vec(-10.0f64..10.0, 1..16), lr in 1e-5f64..1.0) {
        let p = Tensor::new(&[values.len()], values).unwrap();
        let (q, _) = adam_step(&p, &Tensor::zeros(p.shape()), &AdamState::new(p.shape(), lr)).unwrap();
        prop_assert_eq!(q, p);
    }
}

#[test]
fn composed_network_gradient_matches_finite_differences() {
    let mut rng = seeded_rng(21);
    let x = uniform_tensor::<f64>(&[4, 4, 1], &mut rng);
    let target = uniform_tensor::<f64>(&[2, 2, 2], &mut rng);
    let spec = ConvSpec::new(3, 3, 1, 2).with_bias();
    let f = uniform_tensor::<f64>(&spec.filter_shape(), &mut rng);
    let b = uniform_tensor::<f64>(&[2], &mut rng);

    let loss = |x: &Tensor<f64>, f: &Tensor<f64>| {
        let z = conv2d_forward(x, &spec, f, Some(&b)).unwrap();
        mse_loss(&relu_forward(&z), &target, 1).unwrap().0
    };
    let z = conv2d_forward(&x, &spec, &f, Some(&b)).unwrap();
    let (_, g) = mse_loss(&relu_forward(&z), &target, 1).unwrap();
    let gz = relu_backward(&g, &z).unwrap();
    let grads = conv2d_backward(&gz, &x, &spec, &f).unwrap();

    assert!(max_relative_error(&grads.input, &finite_diff_grad(|t| loss(t, &f), &x, 1e-6)) < 1e-4);
    assert!(max_relative_error(&grads.filters, &finite_diff_grad(|t| loss(&x, t), &f, 1e-6)) < 1e-4);
}

#[test]
fn forward_and_init_are_deterministic() {
    let spec = ConvSpec::new(3, 3, 2, 4).with_bias();
    let run = || {
        let mut rng = seeded_rng(77);
        let x = uniform_tensor::<f32>(&[9, 9, 2], &mut rng);
        let f: Tensor<f32> = he_init(&spec.filter_shape(), spec.fan_in(), &mut rng);
        let b = Tensor::<f32>::zeros(&[4]);
        conv2d_forward(&x, &spec, &f, Some(&b)).unwrap()
    };
    let (a, b) = (run(), run());
    let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}
