//! Recorded forward pass of the full render pipeline and its hand-written
//! reverse pass: gradients with respect to both field networks, the
//! scattering network, and the ray (origin/direction, mapped onto pose
//! matrix entries).
//!
//! Sample placement (stratified draws, inverse-CDF resampling, origin
//! selection) is non-differentiable by design: every t-value is a constant
//! to the reverse pass. Gradients flow through sample *values* only.

use crate::field::{
    backward_encoded, eval_encoded, positional_encoding, positional_encoding_backward,
    FieldParams, FieldTape,
};
use crate::islm::{
    backward_islm_encoded, eval_islm_encoded, scatter_points, IslmTape, ScatterDecision,
};
use crate::math::Vec3;
use crate::renderer::{render_primary, scatter_path_term, weigh_samples, PixelRender, RenderConfig, SceneModel};
use crate::sampler::{resample_fine, select_scatter_origins, stratified_samples, Ray, RaySampleSet};
use rand_chacha::ChaCha8Rng;

/// One evaluated sample set plus the per-sample network tapes.
#[derive(Default)]
pub struct SetTrace {
    pub set: RaySampleSet,
    tapes: Vec<FieldTape>,
}

struct PathTrace {
    origin_idx: usize,
    decision: ScatterDecision,
    enc_ds: Vec<f64>,
    sigmas: Vec<f64>,
    colors: Vec<Vec3>,
    tapes: Vec<FieldTape>,
}

/// Reusable record of one (ray, virtual pose) forward pass.
pub struct RayTrace {
    enc_d_field: Vec<f64>,
    pub coarse: SetTrace,
    pub fine: SetTrace,
    scatter_on: bool,
    islm_tapes: Vec<IslmTape>,
    paths: Vec<PathTrace>,
    pub out: PixelRender,
}

impl RayTrace {
    /// Fine-sample indices of the grown scattering paths (empty when
    /// scattering was off for this ray).
    pub fn path_origin_indices(&self) -> Vec<usize> {
        self.paths.iter().map(|p| p.origin_idx).collect()
    }

    pub fn new(model: &SceneModel) -> Self {
        RayTrace {
            enc_d_field: vec![0.0; model.fine.shape.input_d()],
            coarse: SetTrace::default(),
            fine: SetTrace::default(),
            scatter_on: false,
            islm_tapes: Vec::new(),
            paths: Vec::new(),
            out: PixelRender {
                color: Vec3::ZERO,
                primary: Vec3::ZERO,
                coarse: Vec3::ZERO,
                scatter: Vec3::ZERO,
            },
        }
    }
}

fn ensure_field_tapes(tapes: &mut Vec<FieldTape>, n: usize, params: &FieldParams) {
    while tapes.len() < n {
        tapes.push(FieldTape::for_shape(&params.shape));
    }
}

fn eval_set(
    params: &FieldParams,
    ray: &Ray,
    ts: Vec<f64>,
    enc_d: &[f64],
    cfg: &RenderConfig,
    trace: &mut SetTrace,
) {
    let n = ts.len();
    ensure_field_tapes(&mut trace.tapes, n, params);
    trace.set.clear();
    trace.set.t_values = ts;
    for i in 0..n {
        let x = cfg.bounds.normalize(ray.point_at(trace.set.t_values[i]));
        let tape = &mut trace.tapes[i];
        positional_encoding(x, params.shape.l_x, &mut tape.enc_x);
        let out = eval_encoded(params, enc_d, tape);
        trace.set.sigmas.push(out.sigma);
        trace.set.colors.push(out.color);
    }
    weigh_samples(&mut trace.set, ray.t_far);
}

/// Full forward pass with recording. Numerically identical to the inference
/// renderer (which is this function behind a reusable trace).
pub fn forward_traced(
    model: &SceneModel,
    ray: &Ray,
    cfg: &RenderConfig,
    rng: &mut ChaCha8Rng,
    trace: &mut RayTrace,
) {
    positional_encoding(ray.direction, model.fine.shape.l_d, &mut trace.enc_d_field);

    let coarse_ts = stratified_samples(ray, cfg.n_coarse, rng);
    let enc_d = std::mem::take(&mut trace.enc_d_field);
    eval_set(&model.coarse, ray, coarse_ts, &enc_d, cfg, &mut trace.coarse);
    let coarse_color = render_primary(&trace.coarse.set, cfg.background);

    let fine_ts = resample_fine(&trace.coarse.set, (ray.t_near, ray.t_far), cfg.n_fine, rng);
    eval_set(&model.fine, ray, fine_ts, &enc_d, cfg, &mut trace.fine);
    trace.enc_d_field = enc_d;
    let primary = render_primary(&trace.fine.set, cfg.background);

    trace.scatter_on = cfg.scattering_enabled && cfg.k_paths > 0;
    trace.paths.clear();
    if !trace.scatter_on {
        trace.out = PixelRender { color: primary, primary, coarse: coarse_color, scatter: Vec3::ZERO };
        return;
    }

    let scatter = scatter_traced(model, ray, cfg, trace);
    let pre_bg = {
        let set = &trace.fine.set;
        let mut c = Vec3::ZERO;
        for (w, col) in set.weights.iter().zip(&set.colors) {
            c += *col * *w;
        }
        c
    };
    let color = pre_bg + scatter + cfg.background * trace.fine.set.t_final;
    trace.out = PixelRender { color, primary, coarse: coarse_color, scatter };
}

fn scatter_traced(model: &SceneModel, ray: &Ray, cfg: &RenderConfig, trace: &mut RayTrace) -> Vec3 {
    let shape = &model.islm.shape;
    let in_x = shape.input_x();
    let origins = match select_scatter_origins(&trace.fine.set.weights, cfg.k_paths) {
        Ok(r) => r,
        Err(_) => {
            trace.scatter_on = false;
            return Vec3::ZERO;
        }
    };
    let origin_indices: Vec<usize> = if cfg.single_point {
        let anchor = select_scatter_origins(&trace.fine.set.weights, 1).expect("nonempty");
        vec![anchor.start; cfg.k_paths]
    } else {
        origins.collect()
    };

    // scattering decisions
    let n_evals = if cfg.single_point { 1 } else { cfg.k_paths };
    while trace.islm_tapes.len() < n_evals {
        trace.islm_tapes.push(IslmTape::for_shape(shape));
    }
    let mut decisions: Vec<ScatterDecision> = Vec::with_capacity(cfg.k_paths);
    let mut scratch_decisions = Vec::new();
    for e in 0..n_evals {
        let idx = origin_indices[e];
        let x_t = cfg.bounds.normalize(ray.point_at(trace.fine.set.t_values[idx]));
        let tape = &mut trace.islm_tapes[e];
        positional_encoding(x_t, shape.l_x, &mut tape.input[..in_x]);
        positional_encoding(ray.direction, shape.l_d, &mut tape.input[in_x..]);
        eval_islm_encoded(&model.islm, ray.direction, cfg.interval, tape, &mut scratch_decisions);
        if cfg.single_point {
            debug_assert_eq!(scratch_decisions.len(), cfg.k_paths);
            decisions.extend_from_slice(&scratch_decisions);
        } else {
            decisions.push(scratch_decisions[0]);
        }
    }

    // grow and evaluate paths
    let mut total = Vec3::ZERO;
    for k in 0..cfg.k_paths {
        let origin_idx = origin_indices[k];
        let decision = decisions[k];
        let origin = ray.point_at(trace.fine.set.t_values[origin_idx]);
        let path = scatter_points(origin, &decision, cfg.n_scatter);
        let mut pt = PathTrace {
            origin_idx,
            decision,
            enc_ds: vec![0.0; model.fine.shape.input_d()],
            sigmas: Vec::with_capacity(cfg.n_scatter),
            colors: Vec::with_capacity(cfg.n_scatter),
            tapes: Vec::new(),
        };
        ensure_field_tapes(&mut pt.tapes, cfg.n_scatter, &model.fine);
        positional_encoding(decision.direction, model.fine.shape.l_d, &mut pt.enc_ds);
        for (j, p) in path.points.iter().enumerate() {
            let x = cfg.bounds.normalize(*p);
            let tape = &mut pt.tapes[j];
            positional_encoding(x, model.fine.shape.l_x, &mut tape.enc_x);
            let out = eval_encoded(&model.fine, &pt.enc_ds, tape);
            pt.sigmas.push(out.sigma);
            pt.colors.push(out.color);
        }
        let term = scatter_path_term(&pt.sigmas, &pt.colors, decision.interval);
        total += if cfg.weighted_scatter {
            term * trace.fine.set.transmittance[origin_idx]
        } else {
            term
        };
        trace.paths.push(pt);
    }
    total
}

/// Gradient buffers congruent with the trainable networks.
#[derive(Clone, Debug)]
pub struct ModelGrads {
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub islm: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros(model: &SceneModel) -> Self {
        ModelGrads {
            coarse: vec![0.0; model.coarse.values.len()],
            fine: vec![0.0; model.fine.values.len()],
            islm: vec![0.0; model.islm.values.len()],
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.coarse.iter_mut().zip(&other.coarse) {
            *a += b;
        }
        for (a, b) in self.fine.iter_mut().zip(&other.fine) {
            *a += b;
        }
        for (a, b) in self.islm.iter_mut().zip(&other.islm) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coarse.iter().chain(&self.fine).chain(&self.islm).all(|v| v.is_finite())
    }
}

/// Gradient of the loss with respect to the matrix entries of one virtual
/// pose (row-major rotation plus translation).
#[derive(Clone, Copy, Debug, Default)]
pub struct PoseEntryGrads {
    pub rot: [[f64; 3]; 3],
    pub trans: Vec3,
}

impl PoseEntryGrads {
    pub fn add_assign(&mut self, o: &PoseEntryGrads) {
        for i in 0..3 {
            for j in 0..3 {
                self.rot[i][j] += o.rot[i][j];
            }
        }
        self.trans += o.trans;
    }

    pub fn as_entries(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = self.rot[i][j];
            }
        }
        out[9] = self.trans.x;
        out[10] = self.trans.y;
        out[11] = self.trans.z;
        out
    }
}

/// dsigma/dc for one primary sample set under upstream color gradient `g`,
/// including the background-compositing term.
fn primary_value_grads(
    set: &RaySampleSet,
    background: Vec3,
    g: Vec3,
    d_sigma: &mut Vec<f64>,
    d_color: &mut Vec<Vec3>,
) {
    let n = set.len();
    d_sigma.clear();
    d_sigma.resize(n, 0.0);
    d_color.clear();
    d_color.resize(n, Vec3::ZERO);
    // suffix[i] = sum_{j>i} w_j (c_j . g) + t_final (bg . g)
    let mut suffix = set.t_final * background.dot(g);
    for i in (0..n).rev() {
        let cg = set.colors[i].dot(g);
        let alpha_deriv = (-set.sigmas[i] * set.deltas[i]).exp();
        d_sigma[i] = set.deltas[i] * (set.transmittance[i] * alpha_deriv * cg - suffix);
        d_color[i] = g * set.weights[i];
        suffix += set.weights[i] * cg;
    }
}

/// Reverse pass of [`forward_traced`]. Accumulates network gradients into
/// `grads` and ray gradients into `(d_origin, d_direction)`, which the
/// caller chains through ray generation onto pose entries.
pub fn backward_traced(
    model: &SceneModel,
    ray: &Ray,
    cfg: &RenderConfig,
    trace: &RayTrace,
    d_color: Vec3,
    d_coarse_color: Vec3,
    grads: &mut ModelGrads,
) -> (Vec3, Vec3) {
    let half = cfg.bounds.half_extent();
    let mut d_origin = Vec3::ZERO;
    let mut d_direction = Vec3::ZERO;
    let mut d_enc_d_field = vec![0.0; model.fine.shape.input_d()];

    let mut d_sigma = Vec::new();
    let mut d_col = Vec::new();
    // extra position gradients on fine samples from the scattering chain
    let mut d_pos_fine = vec![Vec3::ZERO; trace.fine.set.len()];

    // ------------------------------------------------------------------
    // scattering term
    // ------------------------------------------------------------------
    if trace.scatter_on {
        let shape = &model.islm.shape;
        let in_x = shape.input_x();
        let n_evals = if cfg.single_point { 1 } else { cfg.k_paths };
        // upstream per head, grouped per islm evaluation
        let mut head_grads: Vec<Vec<(Vec3, f64)>> = vec![Vec::new(); n_evals];

        for (k, pt) in trace.paths.iter().enumerate() {
            let l = pt.decision.interval;
            let origin_trans = trace.fine.set.transmittance[pt.origin_idx];
            let gs = if cfg.weighted_scatter { d_color * origin_trans } else { d_color };

            // transmittance chain along the path
            let n = pt.sigmas.len();
            let mut trans = Vec::with_capacity(n);
            let mut log_t = 0.0f64;
            for sigma in &pt.sigmas {
                trans.push((-log_t).exp());
                log_t += sigma * l;
            }
            // suffix of downstream weighted colors, prefix of sigmas
            let mut d_l = 0.0;
            let mut d_ds = Vec3::ZERO;
            let mut d_xt = Vec3::ZERO;
            let mut suffix = 0.0;
            let mut sigma_prefix: Vec<f64> = Vec::with_capacity(n);
            let mut acc = 0.0;
            for sigma in &pt.sigmas {
                sigma_prefix.push(acc);
                acc += sigma;
            }
            for j in (0..n).rev() {
                let cg = pt.colors[j].dot(gs);
                let e = (-pt.sigmas[j] * l).exp();
                let w = trans[j] * (1.0 - e);
                let dsig = l * (trans[j] * e * cg - suffix);
                let dcol = gs * w;
                // dl: opacity term + transmittance term
                d_l += pt.sigmas[j] * trans[j] * e * cg - sigma_prefix[j] * w * cg;
                suffix += w * cg;

                let mut d_enc_x = vec![0.0; model.fine.shape.input_x()];
                let mut d_enc_ds = vec![0.0; model.fine.shape.input_d()];
                backward_encoded(
                    &model.fine,
                    &pt.tapes[j],
                    dsig,
                    dcol,
                    &mut grads.fine,
                    &mut d_enc_x,
                    &mut d_enc_ds,
                );
                let x_norm = cfg.bounds.normalize(
                    ray.point_at(trace.fine.set.t_values[pt.origin_idx])
                        + pt.decision.direction * ((j + 1) as f64 * l),
                );
                let d_xn = positional_encoding_backward(x_norm, model.fine.shape.l_x, &d_enc_x);
                let d_xw = Vec3::new(d_xn.x / half.x, d_xn.y / half.y, d_xn.z / half.z);
                // x_j = x_t + (j+1) l d_s
                d_xt += d_xw;
                d_l += (j + 1) as f64 * pt.decision.direction.dot(d_xw);
                d_ds += d_xw * ((j + 1) as f64 * l);
                // field view-direction input is d_s
                d_ds += positional_encoding_backward(
                    pt.decision.direction,
                    model.fine.shape.l_d,
                    &d_enc_ds,
                );
            }

            // weighted_scatter: gradient through the origin transmittance
            if cfg.weighted_scatter {
                let term = scatter_path_term(&pt.sigmas, &pt.colors, l);
                let dt_origin = term.dot(d_color);
                // T_origin = exp(-sum_{i<origin} sigma_i delta_i)
                for i in 0..pt.origin_idx {
                    d_sigma_extra(
                        trace,
                        model,
                        cfg,
                        ray,
                        grads,
                        i,
                        -trace.fine.set.deltas[i] * origin_trans * dt_origin,
                        &mut d_enc_d_field,
                        &mut d_origin,
                        &mut d_direction,
                    );
                }
            }

            // primary-sample position gradient via the scattering origin
            d_pos_fine[pt.origin_idx] += d_xt;
            let eval_idx = if cfg.single_point { 0 } else { k };
            head_grads[eval_idx].push((d_ds, d_l));
        }

        // scattering-network backward per evaluation
        for (e, heads) in head_grads.iter().enumerate() {
            if heads.is_empty() {
                continue;
            }
            let tape = &trace.islm_tapes[e];
            let mut d_input = vec![0.0; tape.input.len()];
            backward_islm_encoded(&model.islm, cfg.interval, tape, heads, &mut grads.islm, &mut d_input);
            // input = [enc(x_t) | enc(d)]
            let origin_idx = trace.paths[if cfg.single_point { 0 } else { e }].origin_idx;
            let x_norm = cfg.bounds.normalize(ray.point_at(trace.fine.set.t_values[origin_idx]));
            let d_xn = positional_encoding_backward(x_norm, shape.l_x, &d_input[..in_x]);
            let d_xw = Vec3::new(d_xn.x / half.x, d_xn.y / half.y, d_xn.z / half.z);
            d_pos_fine[origin_idx] += d_xw;
            d_direction += positional_encoding_backward(ray.direction, shape.l_d, &d_input[in_x..]);
        }
    }

    // ------------------------------------------------------------------
    // fine primary (+ background) under the scatter-aware upstream
    // ------------------------------------------------------------------
    primary_value_grads(&trace.fine.set, cfg.background, d_color, &mut d_sigma, &mut d_col);
    for i in 0..trace.fine.set.len() {
        let mut d_enc_x = vec![0.0; model.fine.shape.input_x()];
        backward_encoded(
            &model.fine,
            &trace.fine.tapes[i],
            d_sigma[i],
            d_col[i],
            &mut grads.fine,
            &mut d_enc_x,
            &mut d_enc_d_field,
        );
        let x_norm = cfg.bounds.normalize(ray.point_at(trace.fine.set.t_values[i]));
        let d_xn = positional_encoding_backward(x_norm, model.fine.shape.l_x, &d_enc_x);
        let mut d_xw = Vec3::new(d_xn.x / half.x, d_xn.y / half.y, d_xn.z / half.z);
        d_xw += d_pos_fine[i];
        d_origin += d_xw;
        d_direction += d_xw * trace.fine.set.t_values[i];
    }

    // ------------------------------------------------------------------
    // coarse primary under its own loss
    // ------------------------------------------------------------------
    primary_value_grads(&trace.coarse.set, cfg.background, d_coarse_color, &mut d_sigma, &mut d_col);
    for i in 0..trace.coarse.set.len() {
        let mut d_enc_x = vec![0.0; model.coarse.shape.input_x()];
        backward_encoded(
            &model.coarse,
            &trace.coarse.tapes[i],
            d_sigma[i],
            d_col[i],
            &mut grads.coarse,
            &mut d_enc_x,
            &mut d_enc_d_field,
        );
        let x_norm = cfg.bounds.normalize(ray.point_at(trace.coarse.set.t_values[i]));
        let d_xn = positional_encoding_backward(x_norm, model.coarse.shape.l_x, &d_enc_x);
        let d_xw = Vec3::new(d_xn.x / half.x, d_xn.y / half.y, d_xn.z / half.z);
        d_origin += d_xw;
        d_direction += d_xw * trace.coarse.set.t_values[i];
    }

    // shared direction encoding
    d_direction += positional_encoding_backward(ray.direction, model.fine.shape.l_d, &d_enc_d_field);

    (d_origin, d_direction)
}

/// Helper for the weighted-scatter origin-transmittance chain: adds an extra
/// sigma gradient on fine sample `i` (position chain included).
#[allow(clippy::too_many_arguments)]
fn d_sigma_extra(
    trace: &RayTrace,
    model: &SceneModel,
    cfg: &RenderConfig,
    ray: &Ray,
    grads: &mut ModelGrads,
    i: usize,
    d_sigma: f64,
    d_enc_d_field: &mut [f64],
    d_origin: &mut Vec3,
    d_direction: &mut Vec3,
) {
    let half = cfg.bounds.half_extent();
    let mut d_enc_x = vec![0.0; model.fine.shape.input_x()];
    backward_encoded(
        &model.fine,
        &trace.fine.tapes[i],
        d_sigma,
        Vec3::ZERO,
        &mut grads.fine,
        &mut d_enc_x,
        d_enc_d_field,
    );
    let x_norm = cfg.bounds.normalize(ray.point_at(trace.fine.set.t_values[i]));
    let d_xn = positional_encoding_backward(x_norm, model.fine.shape.l_x, &d_enc_x);
    let d_xw = Vec3::new(d_xn.x / half.x, d_xn.y / half.y, d_xn.z / half.z);
    *d_origin += d_xw;
    *d_direction += d_xw * trace.fine.set.t_values[i];
}

/// Chains `(d_origin, d_direction)` through pinhole ray generation onto the
/// pose matrix entries: `origin = t`, `direction = R d_cam / |R d_cam|`.
pub fn ray_backward_to_pose(
    d_origin: Vec3,
    d_direction: Vec3,
    direction: Vec3,
    u_norm: f64,
    d_cam: Vec3,
    pose_grads: &mut PoseEntryGrads,
) {
    let projected = d_direction - direction * direction.dot(d_direction);
    let d_u = projected / u_norm;
    for i in 0..3 {
        for j in 0..3 {
            pose_grads.rot[i][j] += d_u[i] * d_cam[j];
        }
    }
    pose_grads.trans += d_origin;
}
