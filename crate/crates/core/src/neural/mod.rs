//! A small feed-forward stack with hand-written gradients.
//!
//! Every neural model is assembled from [`Mlp2`] blocks: two hidden
//! ReLU layers followed by an output layer whose activation depends on the
//! task. Dropout is inverted (scaled by `1 / (1 - p)` at training time) and
//! applied after the activation of the hidden layers.

mod adam;
pub mod gradcheck;
mod loss;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub use adam::{AdamConfig, AdamState};
pub use loss::{bce, BCE_EPSILON};

pub const DEFAULT_HIDDEN: usize = 100;
pub const DEFAULT_DROPOUT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// `y = dropout(f(x · W + b))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `in x out`
    pub w: DenseMatrix,
    pub b: Vec<f64>,
    pub activation: Activation,
    pub dropout_p: f64,
}

/// Intermediate values of one layer for one minibatch.
#[derive(Debug, Clone)]
pub struct LayerCache {
    input: DenseMatrix,
    pre: DenseMatrix,
    act: DenseMatrix,
    /// Scaled keep-mask (`0` or `1 / (1 - p)`), absent when `p == 0`.
    mask: Option<DenseMatrix>,
}

impl LayerCache {
    pub fn pre_activation(&self) -> &DenseMatrix {
        &self.pre
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub w: DenseMatrix,
    pub b: Vec<f64>,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(
        n_in: usize,
        n_out: usize,
        activation: Activation,
        dropout_p: f64,
        rng: &mut R,
    ) -> Self {
        let a = (6.0 / (n_in + n_out) as f64).sqrt();
        let values = (0..n_in * n_out).map(|_| rng.random_range(-a..a)).collect();
        Self {
            w: DenseMatrix::from_vec(n_in, n_out, values).expect("sized buffer"),
            b: vec![0.0; n_out],
            activation,
            dropout_p,
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.n_rows()
    }

    pub fn n_out(&self) -> usize {
        self.w.n_cols()
    }

    fn forward<R: Rng + ?Sized>(
        &self,
        input: &DenseMatrix,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(DenseMatrix, Option<LayerCache>)> {
        let mut pre = input.matmul(&self.w)?;
        for i in 0..pre.n_rows() {
            for (v, b) in pre.row_mut(i).iter_mut().zip(&self.b) {
                *v += b;
            }
        }
        let mut act = pre.clone();
        act.values_mut()
            .iter_mut()
            .for_each(|v| *v = self.activation.apply(*v));

        match mode {
            Mode::Eval => Ok((act, None)),
            Mode::Train => {
                let mut out = act.clone();
                let mask = if self.dropout_p > 0.0 {
                    let keep = 1.0 - self.dropout_p;
                    let scale = 1.0 / keep;
                    let mut mask = DenseMatrix::zeros(act.n_rows(), act.n_cols());
                    for (m, o) in mask.values_mut().iter_mut().zip(out.values_mut()) {
                        *m = if rng.random::<f64>() < keep { scale } else { 0.0 };
                        *o *= *m;
                    }
                    Some(mask)
                } else {
                    None
                };
                let cache = LayerCache {
                    input: input.clone(),
                    pre,
                    act,
                    mask,
                };
                Ok((out, Some(cache)))
            }
        }
    }

    fn backward(&self, cache: &LayerCache, grad_out: &DenseMatrix) -> Result<(LayerGrads, DenseMatrix)> {
        if grad_out.shape() != cache.act.shape() {
            return Err(Error::Shape {
                op: "layer backward",
                left: grad_out.shape(),
                right: cache.act.shape(),
            });
        }
        let mut g = grad_out.clone();
        if let Some(mask) = &cache.mask {
            for (v, m) in g.values_mut().iter_mut().zip(mask.values()) {
                *v *= m;
            }
        }
        for ((v, &x), &y) in g
            .values_mut()
            .iter_mut()
            .zip(cache.pre.values())
            .zip(cache.act.values())
        {
            *v *= self.activation.derivative(x, y);
        }
        let w = cache.input.t_matmul(&g)?;
        let b = g.col_sums();
        let grad_in = g.matmul_t(&self.w)?;
        Ok((LayerGrads { w, b }, grad_in))
    }
}

/// Two hidden layers plus an output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp2 {
    pub layer1: DenseLayer,
    pub layer2: DenseLayer,
    pub out_layer: DenseLayer,
}

/// Per-layer caches of a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub layers: [LayerCache; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp2Grads {
    pub layer1: LayerGrads,
    pub layer2: LayerGrads,
    pub out_layer: LayerGrads,
}

impl Mlp2Grads {
    /// Gradient buffers in [`Mlp2::params_mut`] order.
    pub fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.layer1.w.values(),
            &self.layer1.b,
            self.layer2.w.values(),
            &self.layer2.b,
            self.out_layer.w.values(),
            &self.out_layer.b,
        ]
    }
}

/// Builds an MLP-2 with ReLU hidden layers followed by dropout.
pub fn init_mlp2<R: Rng + ?Sized>(
    in_dim: usize,
    hidden_dim: usize,
    out_dim: usize,
    out_activation: Activation,
    dropout_p: f64,
    rng: &mut R,
) -> Mlp2 {
    Mlp2::new([in_dim, hidden_dim, hidden_dim, out_dim], out_activation, dropout_p, rng)
}

impl Mlp2 {
    /// MLP-2 with layer widths `dims = [in, hidden1, hidden2, out]`.
    pub fn new<R: Rng + ?Sized>(
        dims: [usize; 4],
        out_activation: Activation,
        dropout_p: f64,
        rng: &mut R,
    ) -> Self {
        assert!(dims.iter().all(|&d| d >= 1), "dimensions must be positive");
        assert!((0.0..1.0).contains(&dropout_p), "dropout probability must lie in [0, 1)");
        let [i, h1, h2, o] = dims;
        Mlp2 {
            layer1: DenseLayer::init(i, h1, Activation::Relu, dropout_p, rng),
            layer2: DenseLayer::init(h1, h2, Activation::Relu, dropout_p, rng),
            out_layer: DenseLayer::init(h2, o, out_activation, 0.0, rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layer1.n_in()
    }

    pub fn out_dim(&self) -> usize {
        self.out_layer.n_out()
    }

    fn layers(&self) -> [&DenseLayer; 3] {
        [&self.layer1, &self.layer2, &self.out_layer]
    }

    /// Forward pass. A cache is returned only in [`Mode::Train`].
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &DenseMatrix,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(DenseMatrix, Option<ForwardCache>)> {
        if input.n_cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "mlp forward",
                left: input.shape(),
                right: self.layer1.w.shape(),
            });
        }
        let (h1, c1) = self.layer1.forward(input, mode, rng)?;
        let (h2, c2) = self.layer2.forward(&h1, mode, rng)?;
        let (out, c3) = self.out_layer.forward(&h2, mode, rng)?;
        let cache = match (c1, c2, c3) {
            (Some(a), Some(b), Some(c)) => Some(ForwardCache { layers: [a, b, c] }),
            _ => None,
        };
        Ok((out, cache))
    }

    /// Deterministic eval-mode forward pass.
    pub fn predict(&self, input: &DenseMatrix) -> Result<DenseMatrix> {
        // eval mode never draws from the generator
        let mut unused = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        self.forward(input, Mode::Eval, &mut unused).map(|(o, _)| o)
    }

    /// Gradients of a scalar loss with respect to all parameters and the
    /// input, given the loss gradient `grad_out` at the output.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &DenseMatrix) -> Result<(Mlp2Grads, DenseMatrix)> {
        let [c1, c2, c3] = &cache.layers;
        if c1.input.n_cols() != self.in_dim() || c3.act.n_cols() != self.out_dim() {
            return Err(Error::ModelMismatch("forward cache does not belong to this network".into()));
        }
        let (g3, d2) = self.out_layer.backward(c3, grad_out)?;
        let (g2, d1) = self.layer2.backward(c2, &d2)?;
        let (g1, d0) = self.layer1.backward(c1, &d1)?;
        Ok((
            Mlp2Grads {
                layer1: g1,
                layer2: g2,
                out_layer: g3,
            },
            d0,
        ))
    }

    /// Mutable parameter buffers: `w` then `b` for each layer in order.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.layer1.w.values_mut(),
            &mut self.layer1.b,
            self.layer2.w.values_mut(),
            &mut self.layer2.b,
            self.out_layer.w.values_mut(),
            &mut self.out_layer.b,
        ]
    }

    pub fn params(&self) -> Vec<&[f64]> {
        vec![
            self.layer1.w.values(),
            &self.layer1.b,
            self.layer2.w.values(),
            &self.layer2.b,
            self.out_layer.w.values(),
            &self.out_layer.b,
        ]
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .iter()
            .all(|l| l.w.is_finite() && l.b.iter().all(|v| v.is_finite()))
    }
}

/// `rows x cols` batch of i.i.d. standard normal samples.
pub fn sample_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let values = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::from_vec(rows, cols, values).expect("sized buffer")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn constant_net(value: f64, act: Activation) -> Mlp2 {
        let layer = |i, o, a| DenseLayer {
            w: DenseMatrix::from_vec(i, o, vec![value; i * o]).unwrap(),
            b: vec![value; o],
            activation: a,
            dropout_p: 0.0,
        };
        Mlp2 {
            layer1: layer(1, 1, Activation::Relu),
            layer2: layer(1, 1, Activation::Relu),
            out_layer: layer(1, 1, act),
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut net = init_mlp2(4, 6, 3, Activation::Relu, 0.0, &mut rng(0));
        for p in net.params_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        let x = sample_gaussian(5, 4, &mut rng(1));
        assert!(net.predict(&x).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let net = constant_net(0.0, Activation::Sigmoid);
        let out = net.predict(&DenseMatrix::zeros(1, 1)).unwrap();
        assert_eq!(out.get(0, 0), 0.5);
    }

    #[test]
    fn train_mode_without_dropout_is_deterministic() {
        let net = init_mlp2(3, 5, 2, Activation::Sigmoid, 0.0, &mut rng(2));
        let x = sample_gaussian(4, 3, &mut rng(3));
        let (a, _) = net.forward(&x, Mode::Train, &mut rng(4)).unwrap();
        let (b, _) = net.forward(&x, Mode::Train, &mut rng(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, net.predict(&x).unwrap());
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = init_mlp2(3, 5, 2, Activation::Sigmoid, 0.0, &mut rng(2));
        assert!(net.predict(&DenseMatrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn init_properties() {
        let a = init_mlp2(7, 10, 3, Activation::Linear, 0.2, &mut rng(9));
        let b = init_mlp2(7, 10, 3, Activation::Linear, 0.2, &mut rng(9));
        assert_eq!(a, b);
        for layer in a.layers() {
            assert!(layer.b.iter().all(|&v| v == 0.0));
            let bound = (6.0 / (layer.n_in() + layer.n_out()) as f64).sqrt();
            assert!(layer.w.values().iter().all(|w| w.abs() < bound));
        }
        assert_eq!(a.layer1.dropout_p, 0.2);
        assert_eq!(a.out_layer.dropout_p, 0.0);
        assert_eq!(a.layer1.activation, Activation::Relu);
    }

    #[test]
    fn backward_is_linear_in_grad_out() {
        let net = init_mlp2(5, 4, 2, Activation::Sigmoid, 0.3, &mut rng(11));
        let x = sample_gaussian(6, 5, &mut rng(12));
        let (_, cache) = net.forward(&x, Mode::Train, &mut rng(13)).unwrap();
        let cache = cache.unwrap();

        let zero = DenseMatrix::zeros(6, 2);
        let (gz, dz) = net.backward(&cache, &zero).unwrap();
        assert!(gz.slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
        assert!(dz.values().iter().all(|&v| v == 0.0));

        let g = sample_gaussian(6, 2, &mut rng(14));
        let mut g2 = g.clone();
        g2.values_mut().iter_mut().for_each(|v| *v *= 2.0);
        let (a, da) = net.backward(&cache, &g).unwrap();
        let (b, db) = net.backward(&cache, &g2).unwrap();
        for (sa, sb) in a.slices().iter().zip(b.slices()) {
            for (x, y) in sa.iter().zip(sb) {
                assert!((2.0 * x - y).abs() < 1e-12);
            }
        }
        for (x, y) in da.values().iter().zip(db.values()) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let a = init_mlp2(5, 4, 2, Activation::Sigmoid, 0.0, &mut rng(1));
        let b = init_mlp2(3, 4, 2, Activation::Sigmoid, 0.0, &mut rng(1));
        let x = sample_gaussian(2, 5, &mut rng(2));
        let (_, cache) = a.forward(&x, Mode::Train, &mut rng(3)).unwrap();
        assert!(b.backward(&cache.unwrap(), &DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn gaussian_moments_and_shape() {
        let s = sample_gaussian(100, 100, &mut rng(17));
        let n = s.values().len() as f64;
        let mean = s.values().iter().sum::<f64>() / n;
        let var = s.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05);
        assert!((var.sqrt() - 1.0).abs() < 0.05);
        assert_eq!(s, sample_gaussian(100, 100, &mut rng(17)));
        assert_eq!(sample_gaussian(0, 4, &mut rng(1)).shape(), (0, 4));
    }

    #[test]
    fn inverted_dropout_matches_eval_in_expectation() {
        let layer = DenseLayer::init(6, 4, Activation::Linear, 0.5, &mut rng(3));
        let x = sample_gaussian(1, 6, &mut rng(4));
        let (eval, _) = layer.forward(&x, Mode::Eval, &mut rng(0)).unwrap();
        let mut acc = [0.0; 4];
        let mut r = rng(5);
        let n = 10_000;
        for _ in 0..n {
            let (out, _) = layer.forward(&x, Mode::Train, &mut r).unwrap();
            for (a, v) in acc.iter_mut().zip(out.row(0)) {
                *a += v / n as f64;
            }
        }
        for (a, e) in acc.iter().zip(eval.row(0)) {
            assert!((a - e).abs() <= 0.05 * e.abs(), "{a} vs {e}");
        }
    }

    #[test]
    fn adam_reduces_reconstruction_loss() {
        let mut r = rng(21);
        let mut net = init_mlp2(6, 16, 6, Activation::Sigmoid, 0.0, &mut r);
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| (0..6).map(|j| if (i + j) % 3 == 0 { 1.0 } else { 0.0 }).collect())
            .collect();
        let x = DenseMatrix::from_rows(&rows);
        let mut opt = AdamState::new(&net.param_sizes(), AdamConfig { lr: 0.01, ..Default::default() });
        let initial = bce(&net.predict(&x).unwrap(), &x).unwrap().0;
        for _ in 0..50 {
            let (out, cache) = net.forward(&x, Mode::Train, &mut r).unwrap();
            let (_, g) = bce(&out, &x).unwrap();
            let (grads, _) = net.backward(&cache.unwrap(), &g).unwrap();
            opt.step(&mut net.params_mut(), &grads.slices()).unwrap();
        }
        let after = bce(&net.predict(&x).unwrap(), &x).unwrap().0;
        assert!(after <= 0.5 * initial, "{initial} -> {after}");
    }
}
