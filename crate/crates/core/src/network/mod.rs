//! The AUTOMAP network: two tanh fully connected layers, two rectified 5x5
//! convolutions with 64 feature maps, and a 7x7 transposed convolution back to
//! one channel. All convolutions are stride 1 with zero same-padding, so every
//! feature map is `n x n`. Gradients are computed analytically.

mod checkpoint;
pub(crate) mod kernels;

pub use checkpoint::{Checkpoint, CheckpointMeta};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use kernels::{col2im, gemm, im2col};

pub const CHANNELS: usize = 64;
pub const CONV_KERNEL: usize = 5;
pub const OUT_KERNEL: usize = 7;
pub const DEFAULT_LAMBDA: f64 = 1e-4;

const CK2: usize = CONV_KERNEL * CONV_KERNEL;
const OK2: usize = OUT_KERNEL * OUT_KERNEL;

pub const TENSOR_NAMES: [&str; 10] = ["W1", "b1", "W2", "b2", "K1", "k1b", "K2", "k2b", "KT", "ktb"];

macro_rules! tensor_set {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            pub d_in: usize,
            pub n: usize,
            /// `n^2 x d_in`, row per FC2 unit.
            pub w1: Vec<f64>,
            pub b1: Vec<f64>,
            /// `n^2 x n^2`, row per FC3 unit.
            pub w2: Vec<f64>,
            pub b2: Vec<f64>,
            /// `64 x 5 x 5`.
            pub k1: Vec<f64>,
            pub k1b: Vec<f64>,
            /// `64 out x 64 in x 5 x 5`.
            pub k2: Vec<f64>,
            pub k2b: Vec<f64>,
            /// `64 in x 7 x 7`; input pixel `(y, x)` of channel `c` adds
            /// `c2[c, y, x] * kt[c, i, j]` to output pixel `(y + i - 3, x + j - 3)`.
            pub kt: Vec<f64>,
            pub ktb: Vec<f64>,
        }

        impl $name {
            pub fn zeros(d_in: usize, n: usize) -> Self {
                let p = n * n;
                $name {
                    d_in,
                    n,
                    w1: vec![0.0; p * d_in],
                    b1: vec![0.0; p],
                    w2: vec![0.0; p * p],
                    b2: vec![0.0; p],
                    k1: vec![0.0; CHANNELS * CK2],
                    k1b: vec![0.0; CHANNELS],
                    k2: vec![0.0; CHANNELS * CHANNELS * CK2],
                    k2b: vec![0.0; CHANNELS],
                    kt: vec![0.0; CHANNELS * OK2],
                    ktb: vec![0.0; 1],
                }
            }

            /// The ten arrays in checkpoint order.
            pub fn tensors(&self) -> [&Vec<f64>; 10] {
                [&self.w1, &self.b1, &self.w2, &self.b2, &self.k1, &self.k1b, &self.k2, &self.k2b, &self.kt, &self.ktb]
            }

            pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 10] {
                [
                    &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2, &mut self.k1,
                    &mut self.k1b, &mut self.k2, &mut self.k2b, &mut self.kt, &mut self.ktb,
                ]
            }

            pub fn num_values(&self) -> usize {
                self.tensors().iter().map(|t| t.len()).sum()
            }

            pub fn same_shape<T: ShapeOf>(&self, other: &T) -> bool {
                let (d_in, n) = other.dims();
                self.d_in == d_in && self.n == n
            }
        }

        impl ShapeOf for $name {
            fn dims(&self) -> (usize, usize) {
                (self.d_in, self.n)
            }
        }
    };
}

pub trait ShapeOf {
    fn dims(&self) -> (usize, usize);
}

tensor_set!(
    /// All trainable weights and biases.
    NetParams
);
tensor_set!(
    /// One gradient array per parameter array.
    Gradients
);

impl Gradients {
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b.iter()).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Glorot-uniform weights with `(fan_in, fan_out)` of `(d_in, n^2)`, `(n^2, n^2)`,
/// `(25, 1600)`, `(1600, 1600)` and `(3136, 49)`; zero biases.
pub fn init_params(d_in: usize, n: usize, seed: u64) -> Result<NetParams> {
    if d_in == 0 || n < crate::numerics::MIN_SIDE {
        return Err(Error::config(format!("cannot build a network with d_in = {d_in}, n = {n}")));
    }
    let p = n * n;
    let mut r = rng::stream(seed, rng::STREAM_INIT);
    let mut params = NetParams::zeros(d_in, n);
    let fill = |t: &mut Vec<f64>, fan_in: usize, fan_out: usize, r: &mut Rng| {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        t.iter_mut().for_each(|w| *w = r.random_range(-limit..limit));
    };
    fill(&mut params.w1, d_in, p, &mut r);
    fill(&mut params.w2, p, p, &mut r);
    fill(&mut params.k1, CK2, CHANNELS * CK2, &mut r);
    fill(&mut params.k2, CHANNELS * CK2, CHANNELS * CK2, &mut r);
    fill(&mut params.kt, CHANNELS * OK2, OK2, &mut r);
    Ok(params)
}

/// Post-activation values of every hidden layer plus the output.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub fc2_act: Vec<f64>,
    pub fc3_act: Vec<f64>,
    pub c1_act: Vec<f64>,
    pub c2_act: Vec<f64>,
    pub output: Vec<f64>,
}

/// Scratch buffers for one forward/backward pass; reuse across examples.
#[derive(Debug, Clone)]
pub struct Workspace {
    n: usize,
    h1: Vec<f64>,
    h2: Vec<f64>,
    cols1: Vec<f64>,
    c1: Vec<f64>,
    cols2: Vec<f64>,
    c2: Vec<f64>,
    cols3: Vec<f64>,
    kt_flip: Vec<f64>,
    out: Vec<f64>,
    // backward
    d_out: Vec<f64>,
    d_cols3: Vec<f64>,
    d_c2: Vec<f64>,
    d_cols2: Vec<f64>,
    d_c1: Vec<f64>,
    d_cols1: Vec<f64>,
    d_h2: Vec<f64>,
    d_h1: Vec<f64>,
    d_kt_flip: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        let p = n * n;
        Workspace {
            n,
            h1: vec![0.0; p],
            h2: vec![0.0; p],
            cols1: vec![0.0; CK2 * p],
            c1: vec![0.0; CHANNELS * p],
            cols2: vec![0.0; CHANNELS * CK2 * p],
            c2: vec![0.0; CHANNELS * p],
            cols3: vec![0.0; CHANNELS * OK2 * p],
            kt_flip: vec![0.0; CHANNELS * OK2],
            out: vec![0.0; p],
            d_out: vec![0.0; p],
            d_cols3: vec![0.0; CHANNELS * OK2 * p],
            d_c2: vec![0.0; CHANNELS * p],
            d_cols2: vec![0.0; CHANNELS * CK2 * p],
            d_c1: vec![0.0; CHANNELS * p],
            d_cols1: vec![0.0; CK2 * p],
            d_h2: vec![0.0; p],
            d_h1: vec![0.0; p],
            d_kt_flip: vec![0.0; CHANNELS * OK2],
        }
    }

    pub fn output(&self) -> &[f64] {
        &self.out
    }

    pub fn fc2_act(&self) -> &[f64] {
        &self.h1
    }

    pub fn c2_act(&self) -> &[f64] {
        &self.c2
    }

    pub fn trace(&self) -> ForwardTrace {
        ForwardTrace {
            fc2_act: self.h1.clone(),
            fc3_act: self.h2.clone(),
            c1_act: self.c1.clone(),
            c2_act: self.c2.clone(),
            output: self.out.clone(),
        }
    }
}

/// Kernel `kt` flipped so the transposed convolution becomes a 7x7 correlation.
fn flip_out_kernel(kt: &[f64], out: &mut [f64]) {
    for c in 0..CHANNELS {
        for i in 0..OUT_KERNEL {
            for j in 0..OUT_KERNEL {
                out[(c * OUT_KERNEL + i) * OUT_KERNEL + j] =
                    kt[(c * OUT_KERNEL + OUT_KERNEL - 1 - i) * OUT_KERNEL + OUT_KERNEL - 1 - j];
            }
        }
    }
}

fn affine_tanh(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(d).zip(b)) {
        let s: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
        *o = (s + bias).tanh();
    }
}

fn add_channel_bias_relu(z: &mut [f64], bias: &[f64], p: usize) {
    for (plane, &b) in z.chunks_exact_mut(p).zip(bias) {
        plane.iter_mut().for_each(|v| *v = (*v + b).max(0.0));
    }
}

fn check_finite(values: &[f64], layer: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("layer {layer}")))
    }
}

/// Run the network on `x`, leaving every activation in `ws`.
pub fn forward_into(p: &NetParams, x: &[f64], ws: &mut Workspace) -> Result<()> {
    if x.len() != p.d_in {
        return Err(Error::dim(format!("network expects {} inputs, got {}", p.d_in, x.len())));
    }
    if ws.n != p.n {
        *ws = Workspace::new(p.n);
    }
    let n = p.n;
    let px = n * n;
    affine_tanh(&p.w1, &p.b1, x, &mut ws.h1);
    check_finite(&ws.h1, "fc2")?;
    affine_tanh(&p.w2, &p.b2, &ws.h1, &mut ws.h2);
    check_finite(&ws.h2, "fc3")?;

    im2col(&ws.h2, 1, n, CONV_KERNEL, &mut ws.cols1);
    gemm(CHANNELS, CK2, px, &p.k1, false, &ws.cols1, false, 0.0, &mut ws.c1);
    add_channel_bias_relu(&mut ws.c1, &p.k1b, px);
    check_finite(&ws.c1, "c1")?;

    im2col(&ws.c1, CHANNELS, n, CONV_KERNEL, &mut ws.cols2);
    gemm(CHANNELS, CHANNELS * CK2, px, &p.k2, false, &ws.cols2, false, 0.0, &mut ws.c2);
    add_channel_bias_relu(&mut ws.c2, &p.k2b, px);
    check_finite(&ws.c2, "c2")?;

    im2col(&ws.c2, CHANNELS, n, OUT_KERNEL, &mut ws.cols3);
    flip_out_kernel(&p.kt, &mut ws.kt_flip);
    gemm(1, CHANNELS * OK2, px, &ws.kt_flip, false, &ws.cols3, false, 0.0, &mut ws.out);
    ws.out.iter_mut().for_each(|v| *v += p.ktb[0]);
    check_finite(&ws.out, "output")?;
    Ok(())
}

pub fn forward(p: &NetParams, x: &[f64], capture: bool) -> Result<(Vec<f64>, Option<ForwardTrace>)> {
    let mut ws = Workspace::new(p.n);
    forward_into(p, x, &mut ws)?;
    let trace = capture.then(|| ws.trace());
    Ok((ws.out, trace))
}

/// `mean((output - target)^2) + lambda * mean(|c2_act|)`.
pub fn loss(output: &[f64], target: &[f64], c2_act: &[f64], lambda: f64) -> Result<f64> {
    if output.len() != target.len() {
        return Err(Error::dim(format!("output has {} values, target {}", output.len(), target.len())));
    }
    let mse = output.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / output.len() as f64;
    let l1 = if c2_act.is_empty() { 0.0 } else { c2_act.iter().map(|v| v.abs()).sum::<f64>() / c2_act.len() as f64 };
    Ok(mse + lambda * l1)
}

/// Forward and backward for one example; overwrites `g` and returns the loss.
pub fn backward_into(
    p: &NetParams,
    x: &[f64],
    target: &[f64],
    lambda: f64,
    ws: &mut Workspace,
    g: &mut Gradients,
) -> Result<f64> {
    if target.len() != p.n * p.n {
        return Err(Error::dim(format!("target has {} values, expected {}", target.len(), p.n * p.n)));
    }
    if !g.same_shape(p) {
        *g = Gradients::zeros(p.d_in, p.n);
    }
    forward_into(p, x, ws)?;
    let value = loss(&ws.out, target, &ws.c2, lambda)?;
    let n = p.n;
    let px = n * n;

    // output layer
    let scale = 2.0 / px as f64;
    for ((d, o), t) in ws.d_out.iter_mut().zip(&ws.out).zip(target) {
        *d = scale * (o - t);
    }
    g.ktb[0] = ws.d_out.iter().sum();
    gemm(CHANNELS * OK2, px, 1, &ws.cols3, false, &ws.d_out, false, 0.0, &mut ws.d_kt_flip);
    flip_out_kernel(&ws.d_kt_flip, &mut g.kt);
    gemm(CHANNELS * OK2, 1, px, &ws.kt_flip, false, &ws.d_out, false, 0.0, &mut ws.d_cols3);
    col2im(&ws.d_cols3, CHANNELS, n, OUT_KERNEL, &mut ws.d_c2);

    // C2: L1 penalty on the rectified maps, then through the rectifier
    let l1_grad = lambda / ws.c2.len() as f64;
    for (d, &a) in ws.d_c2.iter_mut().zip(&ws.c2) {
        *d = if a > 0.0 { *d + l1_grad } else { 0.0 };
    }
    for (gb, plane) in g.k2b.iter_mut().zip(ws.d_c2.chunks_exact(px)) {
        *gb = plane.iter().sum();
    }
    gemm(CHANNELS, px, CHANNELS * CK2, &ws.d_c2, false, &ws.cols2, true, 0.0, &mut g.k2);
    gemm(CHANNELS * CK2, CHANNELS, px, &p.k2, true, &ws.d_c2, false, 0.0, &mut ws.d_cols2);
    col2im(&ws.d_cols2, CHANNELS, n, CONV_KERNEL, &mut ws.d_c1);

    // C1
    for (d, &a) in ws.d_c1.iter_mut().zip(&ws.c1) {
        if a <= 0.0 {
            *d = 0.0;
        }
    }
    for (gb, plane) in g.k1b.iter_mut().zip(ws.d_c1.chunks_exact(px)) {
        *gb = plane.iter().sum();
    }
    gemm(CHANNELS, px, CK2, &ws.d_c1, false, &ws.cols1, true, 0.0, &mut g.k1);
    gemm(CK2, CHANNELS, px, &p.k1, true, &ws.d_c1, false, 0.0, &mut ws.d_cols1);
    col2im(&ws.d_cols1, 1, n, CONV_KERNEL, &mut ws.d_h2);

    // FC3
    for (d, &h) in ws.d_h2.iter_mut().zip(&ws.h2) {
        *d *= 1.0 - h * h;
    }
    g.b2.copy_from_slice(&ws.d_h2);
    outer(&ws.d_h2, &ws.h1, &mut g.w2);
    ws.d_h1.fill(0.0);
    for (row, &d) in p.w2.chunks_exact(px).zip(&ws.d_h2) {
        if d != 0.0 {
            ws.d_h1.iter_mut().zip(row).for_each(|(acc, w)| *acc += d * w);
        }
    }

    // FC2
    for (d, &h) in ws.d_h1.iter_mut().zip(&ws.h1) {
        *d *= 1.0 - h * h;
    }
    g.b1.copy_from_slice(&ws.d_h1);
    outer(&ws.d_h1, x, &mut g.w1);
    Ok(value)
}

fn outer(a: &[f64], b: &[f64], out: &mut [f64]) {
    for (row, &s) in out.chunks_exact_mut(b.len()).zip(a) {
        row.iter_mut().zip(b).for_each(|(o, v)| *o = s * v);
    }
}

pub fn backward(p: &NetParams, x: &[f64], target: &[f64], lambda: f64) -> Result<(f64, Gradients)> {
    let mut ws = Workspace::new(p.n);
    let mut g = Gradients::zeros(p.d_in, p.n);
    let value = backward_into(p, x, target, lambda, &mut ws, &mut g)?;
    Ok((value, g))
}

#[cfg(test)]
mod tests;
