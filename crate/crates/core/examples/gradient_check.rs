//! Compare backprop gradients against central finite differences on a
//! small mixed-activation network.

use da3d::nn::{Activation, Layer, Mlp, Mode};
use da3d::{Matrix, SeededRng};

fn loss(mlp: &Mlp, x: &Matrix, probe: &Matrix) -> f64 {
    let mut rng = SeededRng::new(0);
    let out = mlp.forward(x, Mode::Infer, &mut rng).unwrap().into_output();
    out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
}

fn main() {
    let mut rng = SeededRng::new(7);
    let mlp = Mlp::from_layers(vec![
        Layer::lecun(3, 5, Activation::Selu, 0.0, &mut rng),
        Layer::lecun(5, 4, Activation::Sigmoid, 0.0, &mut rng),
        Layer::lecun(4, 2, Activation::Linear, 0.0, &mut rng),
    ])
    .unwrap();
    let x = Matrix::gaussian(6, 3, 0.0, 1.0, &mut rng);
    let probe = Matrix::gaussian(6, 2, 0.0, 1.0, &mut rng);

    let trace = mlp.forward(&x, Mode::Infer, &mut rng).unwrap();
    let grads = mlp.backward(&trace, &probe).unwrap().grads;

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (li, g) in grads.layers.iter().enumerate() {
        for k in 0..g.weights.data().len() {
            let mut plus = mlp.clone();
            plus.layers_mut()[li].weights.data_mut()[k] += h;
            let mut minus = mlp.clone();
            minus.layers_mut()[li].weights.data_mut()[k] -= h;
            let numeric = (loss(&plus, &x, &probe) - loss(&minus, &x, &probe)) / (2.0 * h);
            let analytic = g.weights.data()[k];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3));
        }
        println!("layer {li}: {} weight gradients checked", g.weights.data().len());
    }
    println!("max relative error {worst:.2e}");
}
