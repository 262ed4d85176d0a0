#![allow(dead_code)]

use ict_core::nn::{Activation, Layer, Network};
use ict_core::Matrix;
use rand::Rng;

/// MLP with ReLU hidden layers, identity output and non-zero biases.
pub fn random_net<R: Rng>(dims: &[usize], rng: &mut R) -> Network {
    let mut net =
        Network::mlp(dims[0], &dims[1..dims.len() - 1], dims[dims.len() - 1], rng).unwrap();
    for layer in net.layers_mut() {
        for b in layer.bias_mut() {
            *b = rng.random_range(-0.3..0.3);
        }
    }
    net
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Matrix {
    Matrix::new(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect(),
    )
    .unwrap()
}

/// Random rows on the probability simplex.
pub fn random_simplex<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let mut m = random_matrix(rows, cols, 0.01, 1.0, rng);
    for r in 0..rows {
        let s: f64 = m.row(r).iter().sum();
        m.row_mut(r).iter_mut().for_each(|v| *v /= s);
    }
    m
}

/// Smallest |pre-activation| of any ReLU unit on `x`. Finite differences are
/// only meaningful away from the kinks.
pub fn relu_margin(net: &Network, x: &Matrix) -> f64 {
    let mut margin = f64::INFINITY;
    let layers = net.layers();
    for k in 0..layers.len() {
        if layers[k].activation() != Activation::Relu {
            continue;
        }
        let mut prefix: Vec<Layer> = layers[..=k].to_vec();
        let last = prefix.pop().unwrap();
        prefix.push(
            Layer::new(
                last.weights().clone(),
                last.bias().to_vec(),
                Activation::Identity,
            )
            .unwrap(),
        );
        let z = Network::new(prefix).unwrap().forward_logits(x).unwrap();
        margin = z.as_slice().iter().fold(margin, |m, v| m.min(v.abs()));
    }
    margin
}

/// Central differences of `f` with respect to every parameter of `net`.
pub fn numeric_gradient(net: &Network, h: f64, f: impl Fn(&Network) -> f64) -> Vec<f64> {
    let base = net.flat_params();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_flat_params(&p).unwrap();
        let up = f(&probe);
        p[i] = base[i] - h;
        probe.set_flat_params(&p).unwrap();
        let down = f(&probe);
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// Largest `|a - n| / max(|a|, |n|, floor)` over all entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
