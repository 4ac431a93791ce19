use super::*;
use crate::matrix::Matrix;
use crate::rng::SeededRng;

fn single(weights: Vec<f64>, in_dim: usize, out_dim: usize, act: Activation) -> Mlp {
    Mlp::from_layers(vec![Layer {
        weights: Matrix::from_vec(in_dim, out_dim, weights).unwrap(),
        bias: vec![0.0; out_dim],
        activation: act,
        dropout: 0.0,
    }])
    .unwrap()
}

/// L = Σ output ⊙ probe, evaluated in inference mode.
fn probe_loss(mlp: &Mlp, x: &Matrix, probe: &Matrix) -> f64 {
    let y = mlp.infer(x).unwrap();
    y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

fn finite_difference(mlp: &Mlp, x: &Matrix, probe: &Matrix, h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for li in 0..mlp.layers().len() {
        let nw = mlp.layers()[li].weights.data().len();
        let nb = mlp.layers()[li].bias.len();
        for k in 0..nw + nb {
            let mut plus = mlp.clone();
            let mut minus = mlp.clone();
            if k < nw {
                plus.layers_mut()[li].weights.data_mut()[k] += h;
                minus.layers_mut()[li].weights.data_mut()[k] -= h;
            } else {
                plus.layers_mut()[li].bias[k - nw] += h;
                minus.layers_mut()[li].bias[k - nw] -= h;
            }
            out.push((probe_loss(&plus, x, probe) - probe_loss(&minus, x, probe)) / (2.0 * h));
        }
    }
    out
}

#[test]
fn identity_linear_layer() {
    let mlp = single(vec![1.0, 0.0, 0.0, 1.0], 2, 2, Activation::Linear);
    let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
    assert_eq!(mlp.infer(&x).unwrap().data(), &[1.0, 2.0]);
}

#[test]
fn selu_layer_values() {
    let mlp = single(vec![1.0], 1, 1, Activation::Selu);
    let zero = Matrix::zeros(1, 1);
    assert_eq!(mlp.infer(&zero).unwrap().data(), &[0.0]);
    let one = Matrix::filled(1, 1, 1.0);
    let y = mlp.infer(&one).unwrap().get(0, 0);
    assert!((y - 1.0507009873554805).abs() < 1e-15);
}

#[test]
fn forward_rejects_wrong_width() {
    let mut rng = SeededRng::new(0);
    let mlp = Mlp::new(
        &[3, 4, 1],
        Activation::Selu,
        Activation::Linear,
        0.0,
        &mut rng,
    )
    .unwrap();
    let err = mlp
        .forward(&Matrix::zeros(2, 5), Mode::Infer, &mut rng)
        .unwrap_err();
    assert!(err.to_string().contains("layer 0"), "{err}");
}

#[test]
fn hidden_activation_widths() {
    let mut rng = SeededRng::new(0);
    let mlp = Mlp::new(
        &[3, 4, 2, 1],
        Activation::Selu,
        Activation::Sigmoid,
        0.0,
        &mut rng,
    )
    .unwrap();
    let tr = mlp
        .forward(&Matrix::zeros(5, 3), Mode::Infer, &mut rng)
        .unwrap();
    assert_eq!(tr.hidden_activations().unwrap().shape(), (5, 6));

    let mlp = Mlp::new(
        &[2, 3, 1],
        Activation::Selu,
        Activation::Sigmoid,
        0.0,
        &mut rng,
    )
    .unwrap();
    let tr = mlp
        .forward(&Matrix::zeros(1, 2), Mode::Infer, &mut rng)
        .unwrap();
    assert_eq!(tr.hidden_activations().unwrap().cols(), 3);

    let mlp = Mlp::new(
        &[2, 1],
        Activation::Selu,
        Activation::Sigmoid,
        0.0,
        &mut rng,
    )
    .unwrap();
    let tr = mlp
        .forward(&Matrix::zeros(1, 2), Mode::Infer, &mut rng)
        .unwrap();
    assert!(tr.hidden_activations().is_err());
}

#[test]
fn zero_output_grad_gives_zero_grads() {
    let mut rng = SeededRng::new(4);
    let mlp = Mlp::new(
        &[3, 5, 2],
        Activation::Selu,
        Activation::Sigmoid,
        0.0,
        &mut rng,
    )
    .unwrap();
    let x = Matrix::gaussian(4, 3, 0.0, 1.0, &mut rng);
    let tr = mlp.forward(&x, Mode::Infer, &mut rng).unwrap();
    let b = mlp.backward(&tr, &Matrix::zeros(4, 2)).unwrap();
    assert!(b.grads.flatten().iter().all(|&g| g == 0.0));
}

#[test]
fn scalar_product_rule() {
    let mlp = single(vec![0.3], 1, 1, Activation::Linear);
    let mut rng = SeededRng::new(0);
    let x = Matrix::filled(1, 1, 2.0);
    let tr = mlp.forward(&x, Mode::Infer, &mut rng).unwrap();
    let b = mlp.backward(&tr, &Matrix::filled(1, 1, 1.0)).unwrap();
    assert_eq!(b.grads.layers[0].weights.get(0, 0), 2.0);
    assert_eq!(b.grads.layers[0].bias[0], 1.0);
    assert_eq!(b.input_grad.get(0, 0), 0.3);
}

#[test]
fn backward_rejects_mismatched_trace() {
    let mut rng = SeededRng::new(0);
    let a = Mlp::new(
        &[2, 3, 1],
        Activation::Selu,
        Activation::Linear,
        0.0,
        &mut rng,
    )
    .unwrap();
    let b = Mlp::new(
        &[2, 4, 1],
        Activation::Selu,
        Activation::Linear,
        0.0,
        &mut rng,
    )
    .unwrap();
    let tr = a
        .forward(&Matrix::zeros(2, 2), Mode::Infer, &mut rng)
        .unwrap();
    assert!(b.backward(&tr, &Matrix::zeros(2, 1)).is_err());
    assert!(a.backward(&tr, &Matrix::zeros(3, 1)).is_err());
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = SeededRng::new(2024);
    let acts = [Activation::Selu, Activation::Sigmoid, Activation::Linear];
    for case in 0..20 {
        let depth = 1 + case % 3;
        let mut dims = vec![1 + rng.below(8)];
        for _ in 0..depth {
            dims.push(1 + rng.below(8));
        }
        let hidden = acts[rng.below(3)];
        let output = acts[rng.below(3)];
        let mlp = Mlp::new(&dims, hidden, output, 0.0, &mut rng).unwrap();
        let x = Matrix::gaussian(3, dims[0], 0.0, 1.0, &mut rng);
        let probe = Matrix::gaussian(3, mlp.output_dim(), 0.0, 1.0, &mut rng);
        let tr = mlp.forward(&x, Mode::Infer, &mut rng).unwrap();
        let analytic = mlp.backward(&tr, &probe).unwrap().grads.flatten();
        let numeric = finite_difference(&mlp, &x, &probe, 1e-6);
        for (a, n) in analytic.iter().zip(&numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
            assert!(rel < 1e-5, "case {case} dims {dims:?}: {a} vs {n}");
        }
    }
}

#[test]
fn input_and_hidden_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(99);
    let mlp = Mlp::new(
        &[3, 4, 5, 2],
        Activation::Selu,
        Activation::Sigmoid,
        0.0,
        &mut rng,
    )
    .unwrap();
    let x = Matrix::gaussian(2, 3, 0.0, 1.0, &mut rng);
    // loss = Σ hidden ⊙ P
    let tr = mlp.forward(&x, Mode::Infer, &mut rng).unwrap();
    let probe = Matrix::gaussian(2, mlp.hidden_width(), 0.0, 1.0, &mut rng);
    let b = mlp.backward_hidden(&tr, None, &probe).unwrap();
    let loss = |x: &Matrix| {
        let mut r = SeededRng::new(0);
        let h = mlp
            .forward(x, Mode::Infer, &mut r)
            .unwrap()
            .hidden_activations()
            .unwrap();
        h.data()
            .iter()
            .zip(probe.data())
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let h = 1e-6;
    for k in 0..x.data().len() {
        let mut p = x.clone();
        let mut m = x.clone();
        p.data_mut()[k] += h;
        m.data_mut()[k] -= h;
        let fd = (loss(&p) - loss(&m)) / (2.0 * h);
        let an = b.input_grad.data()[k];
        assert!((fd - an).abs() < 1e-6 * fd.abs().max(1.0), "{fd} vs {an}");
    }
    // the output layer receives no gradient
    assert!(b.grads.layers[2].weights.data().iter().all(|&g| g == 0.0));
}

#[test]
fn logit_gradient_equals_output_gradient_times_sigmoid_slope() {
    let mut rng = SeededRng::new(5);
    let mlp = Mlp::new(
        &[2, 3, 1],
        Activation::Selu,
        Activation::Sigmoid,
        0.0,
        &mut rng,
    )
    .unwrap();
    let x = Matrix::gaussian(4, 2, 0.0, 1.0, &mut rng);
    let tr = mlp.forward(&x, Mode::Infer, &mut rng).unwrap();
    let og = Matrix::gaussian(4, 1, 0.0, 1.0, &mut rng);
    let p = tr.output();
    let mut lg = og.clone();
    for (g, &pv) in lg.data_mut().iter_mut().zip(p.data()) {
        *g *= pv * (1.0 - pv);
    }
    let a = mlp.backward(&tr, &og).unwrap().grads.flatten();
    let b = mlp.backward_logits(&tr, &lg).unwrap().grads.flatten();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-14);
    }
}

#[test]
fn dropout_gradients_use_the_recorded_mask() {
    let mut rng = SeededRng::new(17);
    let mlp = Mlp::new(
        &[3, 6, 1],
        Activation::Selu,
        Activation::Linear,
        0.3,
        &mut rng,
    )
    .unwrap();
    let x = Matrix::gaussian(5, 3, 0.0, 1.0, &mut rng);
    let probe = Matrix::gaussian(5, 1, 0.0, 1.0, &mut rng);
    let seed_rng = rng.clone();
    let tr = mlp.forward(&x, Mode::Train, &mut rng).unwrap();
    let analytic = mlp.backward(&tr, &probe).unwrap().grads.flatten();
    // replay the same mask by reusing the generator state
    let loss = |m: &Mlp| {
        let mut r = seed_rng.clone();
        let y = m.forward(&x, Mode::Train, &mut r).unwrap().into_output();
        y.data()
            .iter()
            .zip(probe.data())
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let h = 1e-6;
    let mut idx = 0;
    for li in 0..2 {
        let nw = mlp.layers()[li].weights.data().len();
        for k in 0..nw {
            let mut p = mlp.clone();
            let mut m = mlp.clone();
            p.layers_mut()[li].weights.data_mut()[k] += h;
            m.layers_mut()[li].weights.data_mut()[k] -= h;
            let fd = (loss(&p) - loss(&m)) / (2.0 * h);
            assert!((fd - analytic[idx]).abs() < 1e-6 * fd.abs().max(1.0));
            idx += 1;
        }
        idx += mlp.layers()[li].bias.len();
    }
}

#[test]
fn inverted_dropout_preserves_mean() {
    let mut rng = SeededRng::new(8);
    let mlp = Mlp::from_layers(vec![
        Layer {
            weights: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            bias: vec![0.0],
            activation: Activation::Linear,
            dropout: 0.1,
        },
        Layer {
            weights: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            bias: vec![0.0],
            activation: Activation::Linear,
            dropout: 0.0,
        },
    ])
    .unwrap();
    let x = Matrix::gaussian(100_000, 1, 1.0, 0.1, &mut rng);
    let train = mlp
        .forward(&x, Mode::Train, &mut rng)
        .unwrap()
        .into_output();
    let infer = mlp.infer(&x).unwrap();
    assert_eq!(infer, x);
    let rel = (train.mean() - x.mean()).abs() / x.mean();
    assert!(rel < 0.02, "{rel}");
}

#[test]
fn adam_zero_gradient_leaves_params() {
    let mut rng = SeededRng::new(1);
    let mut mlp = Mlp::new(
        &[2, 3, 1],
        Activation::Selu,
        Activation::Linear,
        0.0,
        &mut rng,
    )
    .unwrap();
    let before = mlp.layers().to_vec();
    let g = Gradients::zeros_like(&mlp);
    mlp.adam_step(&g, 1e-4).unwrap();
    assert_eq!(mlp.layers(), &before[..]);
    assert_eq!(mlp.adam_steps(), 1);
}

#[test]
fn adam_first_step_is_minus_lr() {
    let mut mlp = single(vec![0.0], 1, 1, Activation::Linear);
    let mut g = Gradients::zeros_like(&mlp);
    g.layers[0].weights.set(0, 0, 1.0);
    mlp.adam_step(&g, 1e-4).unwrap();
    let w = mlp.layers()[0].weights.get(0, 0);
    // hand computation: m̂ = 1, v̂ = 1, Δ = -lr / (1 + ε)
    assert!((w + 1e-4 / (1.0 + 1e-8)).abs() < 1e-18, "{w}");
}

#[test]
fn adam_matches_scalar_reference() {
    let mut mlp = single(vec![0.5], 1, 1, Activation::Linear);
    let (mut w, mut m, mut v) = (0.5f64, 0.0f64, 0.0f64);
    let lr = 1e-3;
    let grads = [0.3, 0.3, -1.2, 0.05, 2.0];
    for (t, &gv) in grads.iter().enumerate() {
        let mut g = Gradients::zeros_like(&mlp);
        g.layers[0].weights.set(0, 0, gv);
        mlp.adam_step(&g, lr).unwrap();

        m = 0.9 * m + 0.1 * gv;
        v = 0.999 * v + 0.001 * gv * gv;
        let mh = m / (1.0 - 0.9f64.powi(t as i32 + 1));
        let vh = v / (1.0 - 0.999f64.powi(t as i32 + 1));
        w -= lr * mh / (vh.sqrt() + 1e-8);
        assert!((mlp.layers()[0].weights.get(0, 0) - w).abs() < 1e-15);
    }
}

#[test]
fn adam_rejects_non_finite_gradient() {
    let mut rng = SeededRng::new(1);
    let mut mlp = Mlp::new(
        &[2, 3, 1],
        Activation::Selu,
        Activation::Linear,
        0.0,
        &mut rng,
    )
    .unwrap();
    let mut g = Gradients::zeros_like(&mlp);
    g.layers[1].bias[0] = f64::NAN;
    let err = mlp.adam_step(&g, 1e-4).unwrap_err();
    assert!(err.to_string().contains("layer 1"), "{err}");
}

#[test]
fn clipping_values_and_idempotence() {
    let mut mlp = single(vec![0.05, -0.02, 0.005], 1, 3, Activation::Linear);
    mlp.layers_mut()[0].bias = vec![0.3, -0.3, 0.0];
    mlp.clip_weights(0.01);
    assert_eq!(mlp.layers()[0].weights.data(), &[0.01, -0.01, 0.005]);
    assert_eq!(mlp.layers()[0].bias, vec![0.01, -0.01, 0.0]);
    let once = mlp.clone();
    mlp.clip_weights(0.01);
    assert_eq!(mlp, once);
}

#[test]
fn training_is_bitwise_deterministic() {
    let run = || {
        let mut rng = SeededRng::new(123);
        let mut mlp = Mlp::new(
            &[4, 8, 3, 1],
            Activation::Selu,
            Activation::Sigmoid,
            0.1,
            &mut rng,
        )
        .unwrap();
        for _ in 0..10 {
            let x = Matrix::gaussian(16, 4, 0.0, 1.0, &mut rng);
            let tr = mlp.forward(&x, Mode::Train, &mut rng).unwrap();
            let g = tr.output().map(|p| p - 0.5);
            let b = mlp.backward(&tr, &g).unwrap();
            mlp.adam_step(&b.grads, 1e-2).unwrap();
        }
        mlp.param_hash()
    };
    assert_eq!(run(), run());
}

#[test]
fn construction_validates() {
    let mut rng = SeededRng::new(0);
    assert!(Mlp::new(&[3], Activation::Selu, Activation::Linear, 0.0, &mut rng).is_err());
    assert!(Mlp::new(
        &[3, 0, 1],
        Activation::Selu,
        Activation::Linear,
        0.0,
        &mut rng
    )
    .is_err());
    assert!(Mlp::new(
        &[3, 2, 1],
        Activation::Selu,
        Activation::Linear,
        1.0,
        &mut rng
    )
    .is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn clip_is_idempotent_and_bounded(seed in 0u64..1000, c in 0.001f64..1.0) {
            let mut rng = SeededRng::new(seed);
            let mut mlp = Mlp::new(&[3, 5, 2], Activation::Selu, Activation::Linear, 0.0, &mut rng).unwrap();
            mlp.clip_weights(c);
            prop_assert!(mlp.max_abs_param() <= c);
            let once = mlp.clone();
            mlp.clip_weights(c);
            prop_assert_eq!(mlp, once);
        }
    }
}

#[test]
fn input_gradient_matches_full_backward() {
    let mut rng = SeededRng::new(11);
    let net = Mlp::new(&[4, 6, 5, 2], Activation::Selu, Activation::Sigmoid, 0.2, &mut rng).unwrap();
    let x = Matrix::gaussian(7, 4, 0.0, 1.0, &mut rng);
    let tr = net.forward(&x, Mode::Train, &mut rng).unwrap();
    let g = Matrix::gaussian(7, 2, 0.0, 1.0, &mut rng);
    assert_eq!(
        net.input_gradient(&tr, &g).unwrap(),
        net.backward(&tr, &g).unwrap().input_grad
    );
    assert_eq!(
        net.input_gradient_logits(&tr, &g).unwrap(),
        net.backward_logits(&tr, &g).unwrap().input_grad
    );
    let h = Matrix::gaussian(7, 11, 0.0, 1.0, &mut rng);
    assert_eq!(
        net.input_gradient_hidden(&tr, Some(&g), &h).unwrap(),
        net.backward_hidden(&tr, Some(&g), &h).unwrap().input_grad
    );
}
