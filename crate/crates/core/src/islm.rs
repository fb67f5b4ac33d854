//! In-scattering lightpath model: maps a primary sample and ray direction to
//! a scattering direction and sampling interval, and materializes the
//! equidistant samples along the scattering path.

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::nn::{init_layer, layer_len, linear_backward, linear_forward, logistic, squareplus, squareplus_deriv};
use crate::field::{encoding_len, positional_encoding};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Raw direction outputs below this norm are replaced by the primary ray
/// direction and flagged.
const DEGENERATE_DIR_NORM: f64 = 1e-8;

/// Layer-shape descriptor for the scattering network. `heads` is 1 in the
/// default one-ray-per-origin mode and `k` in single-point mode, where each
/// of the `k` paths grown from the shared origin reads its own output head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IslmShape {
    pub l_x: usize,
    pub l_d: usize,
    pub hidden: Vec<usize>,
    pub heads: usize,
}

impl Default for IslmShape {
    fn default() -> Self {
        IslmShape { l_x: 6, l_d: 4, hidden: vec![64, 64, 64], heads: 1 }
    }
}

impl IslmShape {
    pub fn input_x(&self) -> usize {
        encoding_len(self.l_x)
    }
    pub fn input_d(&self) -> usize {
        encoding_len(self.l_d)
    }
    fn input_len(&self) -> usize {
        self.input_x() + self.input_d()
    }
    fn output_len(&self) -> usize {
        4 * self.heads
    }

    pub(crate) fn layers(&self) -> Vec<(usize, usize, usize)> {
        let mut specs = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_len();
        let mut off = 0;
        for &width in &self.hidden {
            specs.push((off, prev, width));
            off += layer_len(prev, width);
            prev = width;
        }
        specs.push((off, prev, self.output_len()));
        specs
    }

    pub fn param_count(&self) -> usize {
        let specs = self.layers();
        let (off, i, o) = *specs.last().unwrap();
        off + layer_len(i, o)
    }
}

#[derive(Clone, Debug)]
pub struct IslmParams {
    pub shape: IslmShape,
    pub values: Vec<f64>,
}

impl IslmParams {
    pub fn zeros(shape: IslmShape) -> Self {
        let n = shape.param_count();
        IslmParams { shape, values: vec![0.0; n] }
    }

    pub fn seeded(shape: IslmShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; shape.param_count()];
        for &(off, n_in, n_out) in &shape.layers() {
            init_layer(&mut values[off..off + layer_len(n_in, n_out)], n_in, n_out, &mut rng);
        }
        IslmParams { shape, values }
    }

    pub fn from_values(shape: IslmShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.param_count() {
            return Err(Error::ShapeMismatch { got: values.len(), want: shape.param_count() });
        }
        Ok(IslmParams { shape, values })
    }
}

/// Learned scattering direction (unit) and sampling interval in `[l_min, l_max]`.
#[derive(Clone, Copy, Debug)]
pub struct ScatterDecision {
    pub direction: Vec3,
    pub interval: f64,
    /// Raw network direction was near zero and was replaced by the primary
    /// ray direction.
    pub degenerate: bool,
}

/// Equidistant samples grown from a primary sample:
/// `points[j-1] = origin + j * interval * direction`.
#[derive(Clone, Debug)]
pub struct ScatterPath {
    pub origin: Vec3,
    pub decision: ScatterDecision,
    pub points: Vec<Vec3>,
}

/// Recorded intermediates of one scattering-network evaluation.
#[derive(Clone, Debug, Default)]
pub struct IslmTape {
    pub input: Vec<f64>,
    hidden_z: Vec<f64>,
    out: Vec<f64>,
    /// Raw direction vector and its norm, per head.
    raw_dir: Vec<(Vec3, f64)>,
}

impl IslmTape {
    pub fn for_shape(shape: &IslmShape) -> Self {
        IslmTape {
            input: vec![0.0; shape.input_len()],
            hidden_z: vec![0.0; shape.hidden.iter().sum::<usize>()],
            out: vec![0.0; shape.output_len()],
            raw_dir: Vec::with_capacity(shape.heads),
        }
    }
}

/// Interval bounds; `l_min > 0` keeps scattering samples off the origin.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct IntervalBounds {
    pub l_min: f64,
    pub l_max: f64,
}

impl IntervalBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_min > 0.0 && self.l_min <= self.l_max) {
            return Err(Error::InvalidConfig(format!(
                "interval bounds [{}, {}] invalid",
                self.l_min, self.l_max
            )));
        }
        Ok(())
    }
}

impl Default for IntervalBounds {
    fn default() -> Self {
        IntervalBounds { l_min: 0.01, l_max: 0.5 }
    }
}

/// Forward pass with `[enc(x), enc(d)]` already written into `tape.input`.
/// Returns one decision per output head.
pub fn eval_islm_encoded(
    params: &IslmParams,
    primary_dir: Vec3,
    bounds: IntervalBounds,
    tape: &mut IslmTape,
    decisions: &mut Vec<ScatterDecision>,
) {
    let shape = &params.shape;
    let specs = shape.layers();
    let n_hidden = shape.hidden.len();

    let mut z_off = 0;
    let mut prev_start = 0;
    for (li, &(off, n_in, n_out)) in specs[..n_hidden].iter().enumerate() {
        let layer = &params.values[off..off + layer_len(n_in, n_out)];
        // activations of the previous layer are recomputed from stored z
        let input: Vec<f64> = if li == 0 {
            tape.input.clone()
        } else {
            tape.hidden_z[prev_start..z_off].iter().map(|&z| squareplus(z)).collect()
        };
        let z_seg = &mut tape.hidden_z[z_off..z_off + n_out];
        linear_forward(layer, &input, z_seg);
        prev_start = z_off;
        z_off += n_out;
    }
    let (off, n_in, n_out) = specs[n_hidden];
    let last_act: Vec<f64> = tape.hidden_z[prev_start..z_off].iter().map(|&z| squareplus(z)).collect();
    linear_forward(&params.values[off..off + layer_len(n_in, n_out)], &last_act, &mut tape.out);

    tape.raw_dir.clear();
    decisions.clear();
    for head in 0..shape.heads {
        let raw = Vec3::new(tape.out[4 * head], tape.out[4 * head + 1], tape.out[4 * head + 2]);
        let norm = raw.norm();
        let (direction, degenerate) = if norm < DEGENERATE_DIR_NORM {
            (primary_dir, true)
        } else {
            (raw / norm, false)
        };
        let interval = bounds.l_min + logistic(tape.out[4 * head + 3]) * (bounds.l_max - bounds.l_min);
        tape.raw_dir.push((raw, norm));
        decisions.push(ScatterDecision { direction, interval, degenerate });
    }
}

/// Reverse pass matching [`eval_islm_encoded`]: `d_decisions` carries the
/// upstream gradients per head (direction and interval).
pub fn backward_islm_encoded(
    params: &IslmParams,
    bounds: IntervalBounds,
    tape: &IslmTape,
    d_decisions: &[(Vec3, f64)],
    d_params: &mut [f64],
    d_input: &mut [f64],
) {
    let shape = &params.shape;
    debug_assert_eq!(d_decisions.len(), shape.heads);
    let specs = shape.layers();
    let n_hidden = shape.hidden.len();

    let mut d_out = vec![0.0; shape.output_len()];
    for (head, (d_dir, d_l)) in d_decisions.iter().enumerate() {
        let (raw, norm) = tape.raw_dir[head];
        if norm >= DEGENERATE_DIR_NORM {
            // d_s = raw / |raw|  =>  J = (I - d_s d_s^T) / |raw|
            let unit = raw / norm;
            let projected = *d_dir - unit * unit.dot(*d_dir);
            let g = projected / norm;
            d_out[4 * head] = g.x;
            d_out[4 * head + 1] = g.y;
            d_out[4 * head + 2] = g.z;
        }
        let y = logistic(tape.out[4 * head + 3]);
        d_out[4 * head + 3] = d_l * y * (1.0 - y) * (bounds.l_max - bounds.l_min);
    }

    // output layer
    let (off, n_in, n_out) = specs[n_hidden];
    let z_total = tape.hidden_z.len();
    let last_start = z_total - shape.hidden[n_hidden - 1];
    let last_act: Vec<f64> = tape.hidden_z[last_start..].iter().map(|&z| squareplus(z)).collect();
    let mut d_act = vec![0.0; n_in];
    linear_backward(
        &params.values[off..off + layer_len(n_in, n_out)],
        &last_act,
        &d_out,
        &mut d_params[off..off + layer_len(n_in, n_out)],
        Some(&mut d_act),
    );

    let mut z_end = z_total;
    for li in (0..n_hidden).rev() {
        let (off, n_in, n_out) = specs[li];
        let z = &tape.hidden_z[z_end - n_out..z_end];
        let d_z: Vec<f64> = d_act.iter().zip(z).map(|(g, &zv)| g * squareplus_deriv(zv)).collect();
        let input: Vec<f64> = if li == 0 {
            tape.input.clone()
        } else {
            tape.hidden_z[z_end - n_out - n_in..z_end - n_out]
                .iter()
                .map(|&zv| squareplus(zv))
                .collect()
        };
        let mut d_in = vec![0.0; n_in];
        linear_backward(
            &params.values[off..off + layer_len(n_in, n_out)],
            &input,
            &d_z,
            &mut d_params[off..off + layer_len(n_in, n_out)],
            Some(&mut d_in),
        );
        if li == 0 {
            for (slot, g) in d_input.iter_mut().zip(&d_in) {
                *slot += g;
            }
        }
        d_act = d_in;
        z_end -= n_out;
    }
}

/// Convenience single-head evaluation from raw inputs. `x` must already be
/// scene-normalized; `direction` unit-norm.
pub fn eval_islm(
    params: &IslmParams,
    x: Vec3,
    direction: Vec3,
    bounds: IntervalBounds,
) -> Result<Vec<ScatterDecision>> {
    if params.values.len() != params.shape.param_count() {
        return Err(Error::ShapeMismatch {
            got: params.values.len(),
            want: params.shape.param_count(),
        });
    }
    debug_assert!((direction.norm() - 1.0).abs() < 1e-6);
    bounds.validate()?;
    let mut tape = IslmTape::for_shape(&params.shape);
    let in_x = params.shape.input_x();
    positional_encoding(x, params.shape.l_x, &mut tape.input[..in_x]);
    positional_encoding(direction, params.shape.l_d, &mut tape.input[in_x..]);
    let mut decisions = Vec::new();
    eval_islm_encoded(params, direction, bounds, &mut tape, &mut decisions);
    Ok(decisions)
}

/// Samples along the scattering path; `j` starts at 1, the origin itself is
/// not a scattering sample.
pub fn scatter_points(origin: Vec3, decision: &ScatterDecision, n_samples: usize) -> ScatterPath {
    debug_assert!(n_samples >= 1);
    let points = (1..=n_samples)
        .map(|j| origin + decision.direction * (j as f64 * decision.interval))
        .collect();
    ScatterPath { origin, decision: *decision, points }
}
