//! Network building blocks with explicit forward/backward passes.
//!
//! Every layer owns its parameters as [`Param`] (value + gradient + optimizer
//! moments) and exposes `forward` returning whatever cache its `backward`
//! needs. Gradients accumulate with `+=` so a step must call `zero_grads`
//! first; this keeps the pieces composable without an autodiff graph.

use crate::diffusion::tensor::FeatMatrix;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One learnable parameter block with its gradient and Adam moments.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    /// First-moment estimate (optimizer state).
    pub m: Vec<f64>,
    /// Second-moment estimate (optimizer state).
    pub v: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let n = value.len();
        Self { value, grad: vec![0.0; n], m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Samples from `U(−1/√fan_in, 1/√fan_in)`, the conventional default for
/// convolution and linear layers.
fn uniform_init(rng: &mut ChaCha8Rng, count: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..count).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// 3×3 convolution, stride 1, zero padding 1 (shape-preserving).
///
/// The kernel is stored flat as `[tap][in_channel][out_channel]` so the
/// forward pass is a single GEMM against the im2col patch matrix.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `(9·in_channels) × out_channels`, row-major.
    pub weight: Param,
    /// `out_channels`.
    pub bias: Param,
}

/// Backward-pass inputs saved by [`Conv2d::forward`].
pub(crate) struct ConvCache {
    col: Array2<f64>,
    n: usize,
    h: usize,
    w: usize,
}

impl Conv2d {
    pub fn new(in_channels: usize, out_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = 9 * in_channels;
        Self {
            in_channels,
            out_channels,
            weight: Param::new(uniform_init(rng, fan_in * out_channels, fan_in)),
            bias: Param::new(uniform_init(rng, out_channels, fan_in)),
        }
    }

    /// All-zero kernel and bias: the standard initialization for an output
    /// head that should start by predicting zero.
    pub fn new_zeroed(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            weight: Param::new(vec![0.0; 9 * in_channels * out_channels]),
            bias: Param::new(vec![0.0; out_channels]),
        }
    }

    fn weight_view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((9 * self.in_channels, self.out_channels), &self.weight.value)
            .expect("weight length matches declared channels")
    }

    pub(crate) fn forward(&self, x: &FeatMatrix) -> (FeatMatrix, ConvCache) {
        debug_assert_eq!(x.channels(), self.in_channels);
        let col = x.im2col();
        let mut y = col.dot(&self.weight_view());
        for mut row in y.rows_mut() {
            for (v, b) in row.iter_mut().zip(&self.bias.value) {
                *v += b;
            }
        }
        (
            FeatMatrix { rows: y, n: x.n, h: x.h, w: x.w },
            ConvCache { col, n: x.n, h: x.h, w: x.w },
        )
    }

    /// Accumulates weight/bias gradients and returns the input cotangent.
    pub(crate) fn backward(&mut self, dy: &FeatMatrix, cache: &ConvCache) -> FeatMatrix {
        let dw = cache.col.t().dot(&dy.rows);
        for (g, d) in self.weight.grad.iter_mut().zip(dw.iter()) {
            *g += d;
        }
        for row in dy.rows.rows() {
            for (g, d) in self.bias.grad.iter_mut().zip(row.iter()) {
                *g += d;
            }
        }
        let dcol = dy.rows.dot(&self.weight_view().t());
        FeatMatrix::col2im(&dcol, cache.n, self.in_channels, cache.h, cache.w)
    }
}

/// Fully connected layer on `(batch, features)` matrices.
#[derive(Debug, Clone)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    /// `in_features × out_features`, row-major.
    pub weight: Param,
    /// `out_features`.
    pub bias: Param,
}

pub(crate) struct LinearCache {
    x: Array2<f64>,
}

impl Linear {
    pub fn new(in_features: usize, out_features: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            in_features,
            out_features,
            weight: Param::new(uniform_init(rng, in_features * out_features, in_features)),
            bias: Param::new(uniform_init(rng, out_features, in_features)),
        }
    }

    fn weight_view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.in_features, self.out_features), &self.weight.value)
            .expect("weight length matches declared features")
    }

    pub(crate) fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, LinearCache) {
        debug_assert_eq!(x.ncols(), self.in_features);
        let mut y = x.dot(&self.weight_view());
        for mut row in y.rows_mut() {
            for (v, b) in row.iter_mut().zip(&self.bias.value) {
                *v += b;
            }
        }
        (y, LinearCache { x: x.clone() })
    }

    pub(crate) fn backward(&mut self, dy: &Array2<f64>, cache: &LinearCache) -> Array2<f64> {
        let dw = cache.x.t().dot(dy);
        for (g, d) in self.weight.grad.iter_mut().zip(dw.iter()) {
            *g += d;
        }
        for row in dy.rows() {
            for (g, d) in self.bias.grad.iter_mut().zip(row.iter()) {
                *g += d;
            }
        }
        dy.dot(&self.weight_view().t())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// SiLU activation `x·σ(x)` applied elementwise. The caller keeps the
/// pre-activation as the backward cache.
pub(crate) fn silu_forward(x: &FeatMatrix) -> FeatMatrix {
    FeatMatrix {
        rows: x.rows.mapv(|v| v * sigmoid(v)),
        n: x.n,
        h: x.h,
        w: x.w,
    }
}

/// `d SiLU/dx = σ(x)·(1 + x·(1 − σ(x)))`.
pub(crate) fn silu_backward(dy: &FeatMatrix, pre: &FeatMatrix) -> FeatMatrix {
    let mut rows = dy.rows.clone();
    for (d, x) in rows.iter_mut().zip(pre.rows.iter()) {
        let s = sigmoid(*x);
        *d *= s * (1.0 + x * (1.0 - s));
    }
    FeatMatrix { rows, n: dy.n, h: dy.h, w: dy.w }
}

/// Sinusoidal timestep embedding: frequencies decay geometrically from 1 to
/// ~1/10000 over `dim/2` bands, with sines in the first half and cosines in
/// the second.
pub fn time_embedding(ts: &[usize], dim: usize) -> Array2<f64> {
    assert!(dim >= 2 && dim % 2 == 0, "embedding dimension must be even");
    let half = dim / 2;
    let mut out = Array2::zeros((ts.len(), dim));
    for (b, &t) in ts.iter().enumerate() {
        for k in 0..half {
            let freq = (-(10000.0f64).ln() * k as f64 / half as f64).exp();
            let ang = t as f64 * freq;
            out[[b, k]] = ang.sin();
            out[[b, half + k]] = ang.cos();
        }
    }
    out
}

/// Adds `bias[b, c]` to every spatial position of batch item `b` (the
/// time-conditioning pathway injects per-channel offsets this way).
pub(crate) fn add_item_bias(x: &mut FeatMatrix, bias: &Array2<f64>) {
    let c = x.channels();
    debug_assert_eq!(bias.nrows(), x.n);
    debug_assert_eq!(bias.ncols(), c);
    let hw = x.h * x.w;
    let data = x.rows.as_slice_mut().expect("contiguous");
    for b in 0..bias.nrows() {
        for r in 0..hw {
            let base = (b * hw + r) * c;
            for ch in 0..c {
                data[base + ch] += bias[[b, ch]];
            }
        }
    }
}

/// Adjoint of [`add_item_bias`]: sums the cotangent over spatial positions,
/// giving a `(batch, channels)` gradient.
pub(crate) fn item_bias_grad(dy: &FeatMatrix) -> Array2<f64> {
    let c = dy.channels();
    let hw = dy.h * dy.w;
    let mut out = Array2::zeros((dy.n, c));
    let data = dy.rows.as_slice().expect("contiguous");
    for b in 0..dy.n {
        for r in 0..hw {
            let base = (b * hw + r) * c;
            for ch in 0..c {
                out[[b, ch]] += data[base + ch];
            }
        }
    }
    out
}
