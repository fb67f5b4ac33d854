//! Dense-layer primitives shared by the radiance field and the scattering
//! model: flat parameter vectors, forward/backward passes, activations.
//!
//! Parameters for a layer are packed row-major weights `[out][in]` followed
//! by biases `[out]`; gradients use the identical layout so a gradient
//! vector is congruent with its parameter vector.

use rand::Rng;

#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else if z < -30.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

/// d softplus / dz, the logistic function.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Smoothing parameter of [`squareplus`]; kink smoothed over roughly
/// `sqrt(B)` around zero.
const SQUAREPLUS_B: f64 = 0.04;

/// Hidden-layer activation `(z + sqrt(z^2 + B)) / 2`: shaped like a
/// rectifier but infinitely differentiable, so finite-difference gradient
/// checks stay clean, and far cheaper than exp-based alternatives.
#[inline]
pub fn squareplus(z: f64) -> f64 {
    0.5 * (z + (z * z + SQUAREPLUS_B).sqrt())
}

#[inline]
pub fn squareplus_deriv(z: f64) -> f64 {
    0.5 * (1.0 + z / (z * z + SQUAREPLUS_B).sqrt())
}

/// Number of parameters of a dense layer.
#[inline]
pub fn layer_len(input: usize, output: usize) -> usize {
    input * output + output
}

/// `out = W * input + b` where `layer = [W row-major | b]`.
pub fn linear_forward(layer: &[f64], input: &[f64], out: &mut [f64]) {
    let n_in = input.len();
    let n_out = out.len();
    debug_assert_eq!(layer.len(), layer_len(n_in, n_out));
    let (w, b) = layer.split_at(n_in * n_out);
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
        let mut acc = *bias;
        for (x, wv) in input.iter().zip(row) {
            acc += x * wv;
        }
        *o = acc;
    }
}

/// Accumulates `d_layer += d_out ⊗ input` (plus bias grads) and, when
/// `d_input` is provided, `d_input += W^T d_out`.
pub fn linear_backward(
    layer: &[f64],
    input: &[f64],
    d_out: &[f64],
    d_layer: &mut [f64],
    mut d_input: Option<&mut [f64]>,
) {
    let n_in = input.len();
    let n_out = d_out.len();
    debug_assert_eq!(layer.len(), layer_len(n_in, n_out));
    debug_assert_eq!(d_layer.len(), layer.len());
    let w = &layer[..n_in * n_out];
    let (dw, db) = d_layer.split_at_mut(n_in * n_out);
    for (o, g) in d_out.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        let row = &mut dw[o * n_in..(o + 1) * n_in];
        for (slot, x) in row.iter_mut().zip(input) {
            *slot += g * x;
        }
        db[o] += g;
        if let Some(di) = d_input.as_deref_mut() {
            let wrow = &w[o * n_in..(o + 1) * n_in];
            for (slot, wv) in di.iter_mut().zip(wrow) {
                *slot += g * wv;
            }
        }
    }
}

/// Uniform Glorot initialization for one layer; biases start at zero.
pub fn init_layer(layer: &mut [f64], input: usize, output: usize, rng: &mut impl Rng) {
    debug_assert_eq!(layer.len(), layer_len(input, output));
    let bound = (6.0 / (input + output) as f64).sqrt();
    let (w, b) = layer.split_at_mut(input * output);
    for v in w.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
    for v in b.iter_mut() {
        *v = 0.0;
    }
}
