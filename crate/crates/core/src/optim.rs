//! Photometric loss, full-pipeline gradients and the joint training loop
//! over field parameters, scattering parameters and per-image pose twists.
//!
//! Poses under optimization are parameterized as two twists relative to
//! their initial estimates; the loss gradient reaches them through the
//! interpolation chain (exact dual-number Jacobians) and ray generation.

use crate::backprop::{
    backward_traced, forward_traced, ray_backward_to_pose, ModelGrads, PoseEntryGrads, RayTrace,
};
use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::math::{derive_seed, Vec3};
use crate::metrics::psnr;
use crate::parallel::map_range_ordered;
use crate::renderer::{pixel_ray_with_gen, render_image, RenderConfig, SceneModel};
use crate::se3::{compose, interpolated_pose, interpolated_pose_jacobian, se3_exp, Pose, Twist};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

const SALT_BATCH: u64 = 0x62617463;
const SALT_RAY: u64 = 0x72617931;
const SALT_NOISE: u64 = 0x6e6f6973;
const SALT_EVAL: u64 = 0x6576616c;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub iters: usize,
    pub batch_rays: usize,
    pub lr_field: f64,
    pub lr_islm: f64,
    pub lr_twist: f64,
    /// Multiplicative learning-rate factor reached at the end of the run.
    pub lr_decay: f64,
    /// Scattering term joins the loss after this many iterations.
    pub islm_warmup_iters: usize,
    pub eval_interval: usize,
    pub log_interval: usize,
    /// Synthetic-data pose initialization noise.
    pub pose_noise_rot_deg: f64,
    pub pose_noise_trans: f64,
    /// Mean reduction instead of the default sum.
    pub mean_loss: bool,
    /// Exposure fractions t/(n-1) instead of t/n.
    pub inclusive_endpoints: bool,
    /// Holdout views rendered for the psnr_holdout column.
    pub holdout_eval_count: usize,
    /// Rays per parallel gradient chunk (fixed so results do not depend on
    /// the worker count).
    pub chunk_rays: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            iters: 20_000,
            batch_rays: 1024,
            lr_field: 5e-4,
            lr_islm: 5e-4,
            lr_twist: 1e-3,
            lr_decay: 0.1,
            islm_warmup_iters: 1000,
            eval_interval: 500,
            log_interval: 100,
            pose_noise_rot_deg: 0.8,
            pose_noise_trans: 0.01,
            mean_loss: false,
            inclusive_endpoints: false,
            holdout_eval_count: 3,
            chunk_rays: 8,
        }
    }
}

/// Sum of squared per-channel differences (mean variant behind the flag).
pub fn photometric_loss(pred: &[Vec3], gt: &[Vec3], mean: bool) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch(pred.len(), gt.len()));
    }
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let d = *p - *g;
            d.dot(d)
        })
        .sum();
    if mean && !pred.is_empty() {
        Ok(sum / (3 * pred.len()) as f64)
    } else {
        Ok(sum)
    }
}

/// All gradients of one batch, congruent with the trainables.
#[derive(Clone, Debug)]
pub struct GradientBundle {
    pub model: ModelGrads,
    /// Per image: d loss / d [delta_start; delta_end].
    pub twists: Vec<[f64; 12]>,
}

impl GradientBundle {
    pub fn zeros(model: &SceneModel, n_images: usize) -> Self {
        GradientBundle { model: ModelGrads::zeros(model), twists: vec![[0.0; 12]; n_images] }
    }

    pub fn is_finite(&self) -> bool {
        self.model.is_finite() && self.twists.iter().flatten().all(|v| v.is_finite())
    }
}

/// Pixels of one image entering the loss.
#[derive(Clone, Debug)]
pub struct BatchSpec {
    pub image: usize,
    pub pixels: Vec<usize>,
}

struct ChunkOut {
    loss: f64,
    grads: Option<ModelGrads>,
    pose_grads: Vec<PoseEntryGrads>,
}

/// Loss (and optionally gradients) of the photometric objective over the
/// given batches, fine loss plus coarse-network loss. `iter_salt` seeds the
/// per-ray sample streams so a forward recomputation is bit-identical.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss_and_grads(
    model: &SceneModel,
    dataset: &Dataset,
    init_poses: &[(Pose, Pose)],
    twists: &[[f64; 12]],
    rcfg: &RenderConfig,
    ocfg: &OptimConfig,
    seed: u64,
    iter_salt: u64,
    batches: &[BatchSpec],
    with_grads: bool,
) -> Result<(f64, GradientBundle)> {
    let mut total_loss = 0.0;
    let mut bundle = GradientBundle::zeros(model, dataset.views.len());

    for batch in batches {
        let view = &dataset.views[batch.image];
        let init = &init_poses[batch.image];
        let tw = &twists[batch.image];
        let fractions = crate::blur::exposure_fractions(view.n, ocfg.inclusive_endpoints);

        // virtual poses and their twist Jacobians, once per image
        let mut poses = Vec::with_capacity(fractions.len());
        let mut jacs = Vec::with_capacity(fractions.len());
        for f in &fractions {
            if with_grads {
                let (pose, jac) = interpolated_pose_jacobian(&init.0, &init.1, tw, *f)?;
                poses.push(pose);
                jacs.push(jac);
            } else {
                poses.push(interpolated_pose(&init.0, &init.1, tw, *f)?);
            }
        }

        let n_poses = poses.len();
        let inv_n = 1.0 / n_poses as f64;
        let width = view.blurred.width;
        let scale = if ocfg.mean_loss {
            1.0 / (3 * batch.pixels.len()) as f64
        } else {
            1.0
        };

        let n_chunks = batch.pixels.len().div_ceil(ocfg.chunk_rays.max(1));
        let outputs: Vec<ChunkOut> = map_range_ordered(n_chunks, |chunk_idx| {
            let lo = chunk_idx * ocfg.chunk_rays.max(1);
            let hi = (lo + ocfg.chunk_rays.max(1)).min(batch.pixels.len());
            let mut out = ChunkOut {
                loss: 0.0,
                grads: with_grads.then(|| ModelGrads::zeros(model)),
                pose_grads: vec![PoseEntryGrads::default(); n_poses],
            };
            let mut trace = RayTrace::new(model);
            let mut colors = vec![(Vec3::ZERO, Vec3::ZERO); n_poses];
            for &pixel in &batch.pixels[lo..hi] {
                let (px, py) = (pixel % width, pixel / width);
                let gt = view.blurred.pixel(px, py);

                // forward all virtual poses
                for (t, pose) in poses.iter().enumerate() {
                    let (ray, _, _) = pixel_ray_with_gen(pose, &view.intrinsics, px, py, rcfg);
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        seed,
                        &[SALT_RAY, iter_salt, batch.image as u64, pixel as u64, t as u64],
                    ));
                    forward_traced(model, &ray, rcfg, &mut rng, &mut trace);
                    colors[t] = (trace.out.color, trace.out.coarse);
                }
                let blurred: Vec3 =
                    colors.iter().fold(Vec3::ZERO, |acc, (c, _)| acc + *c) * inv_n;
                let blurred_coarse: Vec3 =
                    colors.iter().fold(Vec3::ZERO, |acc, (_, c)| acc + *c) * inv_n;
                let d_fine = blurred - gt;
                let d_coarse = blurred_coarse - gt;
                out.loss += scale * (d_fine.dot(d_fine) + d_coarse.dot(d_coarse));

                let Some(grads) = out.grads.as_mut() else { continue };
                let d_blur = d_fine * (2.0 * scale);
                let d_blur_coarse = d_coarse * (2.0 * scale);
                // backward per pose (re-run forward with the identical stream)
                for (t, pose) in poses.iter().enumerate() {
                    let (ray, d_cam, u_norm) =
                        pixel_ray_with_gen(pose, &view.intrinsics, px, py, rcfg);
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        seed,
                        &[SALT_RAY, iter_salt, batch.image as u64, pixel as u64, t as u64],
                    ));
                    forward_traced(model, &ray, rcfg, &mut rng, &mut trace);
                    let (d_o, d_d) = backward_traced(
                        model,
                        &ray,
                        rcfg,
                        &trace,
                        d_blur * inv_n,
                        d_blur_coarse * inv_n,
                        grads,
                    );
                    ray_backward_to_pose(
                        d_o,
                        d_d,
                        ray.direction,
                        u_norm,
                        d_cam,
                        &mut out.pose_grads[t],
                    );
                }
            }
            out
        });

        // fixed-order merge keeps results independent of the worker count
        let mut pose_grads = vec![PoseEntryGrads::default(); n_poses];
        for out in outputs {
            total_loss += out.loss;
            if let Some(g) = out.grads {
                bundle.model.add_assign(&g);
            }
            for (acc, g) in pose_grads.iter_mut().zip(&out.pose_grads) {
                acc.add_assign(g);
            }
        }
        if with_grads {
            let tw_grad = &mut bundle.twists[batch.image];
            for (jac, pg) in jacs.iter().zip(&pose_grads) {
                let entries = pg.as_entries();
                for (coord, slot) in tw_grad.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (e, entry_grad) in entries.iter().enumerate() {
                        acc += jac[e][coord] * entry_grad;
                    }
                    *slot += acc;
                }
            }
        }
    }

    if with_grads && !bundle.is_finite() {
        return Err(Error::NonFiniteGradient("batch"));
    }
    Ok((total_loss, bundle))
}

/// Forward-only loss, used by finite-difference verification.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss(
    model: &SceneModel,
    dataset: &Dataset,
    init_poses: &[(Pose, Pose)],
    twists: &[[f64; 12]],
    rcfg: &RenderConfig,
    ocfg: &OptimConfig,
    seed: u64,
    iter_salt: u64,
    batches: &[BatchSpec],
) -> Result<f64> {
    batch_loss_and_grads(
        model, dataset, init_poses, twists, rcfg, ocfg, seed, iter_salt, batches, false,
    )
    .map(|(loss, _)| loss)
}

// ---------------------------------------------------------------------------
// Adaptive-moment updates
// ---------------------------------------------------------------------------

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, Default)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Moments { m: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// One Adam update over a flat parameter group. `t` is the 1-based step.
pub fn adam_update(params: &mut [f64], grads: &[f64], moments: &mut Moments, lr: f64, t: usize) {
    debug_assert_eq!(params.len(), grads.len());
    let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        moments.m[i] = ADAM_BETA1 * moments.m[i] + (1.0 - ADAM_BETA1) * g;
        moments.v[i] = ADAM_BETA2 * moments.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = moments.m[i] / bc1;
        let v_hat = moments.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub coarse: Moments,
    pub fine: Moments,
    pub islm: Moments,
    /// Flat, 12 per image.
    pub twists: Moments,
    pub t: usize,
}

impl AdamState {
    pub fn new(model: &SceneModel, n_images: usize) -> Self {
        AdamState {
            coarse: Moments::zeros(model.coarse.values.len()),
            fine: Moments::zeros(model.fine.values.len()),
            islm: Moments::zeros(model.islm.values.len()),
            twists: Moments::zeros(12 * n_images),
            t: 0,
        }
    }
}

/// Full optimization state.
pub struct TrainState {
    pub model: SceneModel,
    /// Initial pose estimates (start, end) per image.
    pub init_poses: Vec<(Pose, Pose)>,
    /// Optimized twist corrections per image.
    pub twists: Vec<[f64; 12]>,
    pub adam: AdamState,
    pub step: usize,
    pub seed: u64,
}

impl TrainState {
    /// Current optimized exposure poses of one image.
    pub fn exposure_poses(&self, image: usize) -> Result<(Pose, Pose)> {
        let tw = &self.twists[image];
        let ds = Twist::from_coords(&tw[..6].try_into().expect("6 coords"))?;
        let de = Twist::from_coords(&tw[6..].try_into().expect("6 coords"))?;
        Ok((
            compose(&self.init_poses[image].0, &se3_exp(&ds)),
            compose(&self.init_poses[image].1, &se3_exp(&de)),
        ))
    }
}

/// Per-group learning rates with exponential decay to `lr_decay` over the run.
fn lr_at(base: f64, iter: usize, ocfg: &OptimConfig) -> f64 {
    let progress = if ocfg.iters > 0 { iter as f64 / ocfg.iters as f64 } else { 0.0 };
    base * ocfg.lr_decay.powf(progress)
}

/// Applies one optimization step. Zero gradients leave parameters unchanged
/// up to moment bookkeeping.
pub fn step(state: &mut TrainState, grads: &GradientBundle, ocfg: &OptimConfig) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFiniteGradient("step"));
    }
    state.adam.t += 1;
    let t = state.adam.t;
    let it = state.step;
    adam_update(
        &mut state.model.coarse.values,
        &grads.model.coarse,
        &mut state.adam.coarse,
        lr_at(ocfg.lr_field, it, ocfg),
        t,
    );
    adam_update(
        &mut state.model.fine.values,
        &grads.model.fine,
        &mut state.adam.fine,
        lr_at(ocfg.lr_field, it, ocfg),
        t,
    );
    adam_update(
        &mut state.model.islm.values,
        &grads.model.islm,
        &mut state.adam.islm,
        lr_at(ocfg.lr_islm, it, ocfg),
        t,
    );
    let mut flat: Vec<f64> = state.twists.iter().flatten().copied().collect();
    let flat_grads: Vec<f64> = grads.twists.iter().flatten().copied().collect();
    adam_update(
        &mut flat,
        &flat_grads,
        &mut state.adam.twists,
        lr_at(ocfg.lr_twist, it, ocfg),
        t,
    );
    for (i, chunk) in flat.chunks_exact(12).enumerate() {
        state.twists[i].copy_from_slice(chunk);
    }
    state.step += 1;
    Ok(())
}

/// One row of the metrics log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub loss: f64,
    pub psnr_holdout: f64,
    pub lr: f64,
    pub wall_seconds: f64,
}

pub fn write_metrics_csv(path: &std::path::Path, rows: &[MetricsRow]) -> Result<()> {
    let mut out = String::from("iteration,loss,psnr_holdout,lr,wall_seconds\n");
    for r in rows {
        let psnr = if r.psnr_holdout.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:.6}", r.psnr_holdout)
        };
        out.push_str(&format!(
            "{},{:.9e},{},{:.6e},{:.3}\n",
            r.iteration, r.loss, psnr, r.lr, r.wall_seconds
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Mean holdout PSNR over the first `count` held-out views under the current
/// model.
pub fn holdout_psnr(
    state: &TrainState,
    dataset: &Dataset,
    rcfg: &RenderConfig,
    count: usize,
) -> Result<f64> {
    let n = count.min(dataset.holdout.len());
    if n == 0 {
        return Ok(f64::NAN);
    }
    let mut acc = 0.0;
    for view in &dataset.holdout[..n] {
        let img = render_image(
            &state.model,
            &view.pose,
            &view.intrinsics,
            view.sharp.width,
            view.sharp.height,
            rcfg,
            derive_seed(state.seed, &[SALT_EVAL]),
            0,
        )
        .clamped();
        acc += psnr(&img, &view.sharp)?;
    }
    Ok(acc / n as f64)
}

/// Initializes a training state: seeded networks and noisy copies of the
/// dataset poses as initial estimates.
pub fn init_train_state(
    dataset: &Dataset,
    model: SceneModel,
    ocfg: &OptimConfig,
    seed: u64,
) -> Result<TrainState> {
    let mut init_poses = Vec::with_capacity(dataset.views.len());
    let rot = ocfg.pose_noise_rot_deg.to_radians();
    let trans = ocfg.pose_noise_trans;
    for (i, view) in dataset.views.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[SALT_NOISE, i as u64]));
        let mut noisy = |pose: &Pose| -> Result<Pose> {
            let twist = Twist::new(
                Vec3::new(
                    rng.random_range(-rot..=rot),
                    rng.random_range(-rot..=rot),
                    rng.random_range(-rot..=rot),
                ),
                Vec3::new(
                    rng.random_range(-trans..=trans),
                    rng.random_range(-trans..=trans),
                    rng.random_range(-trans..=trans),
                ),
            )?;
            Ok(compose(pose, &se3_exp(&twist)))
        };
        init_poses.push((noisy(&view.start)?, noisy(&view.end)?));
    }
    let n_images = dataset.views.len();
    let adam = AdamState::new(&model, n_images);
    Ok(TrainState {
        model,
        init_poses,
        twists: vec![[0.0; 12]; n_images],
        adam,
        step: 0,
        seed,
    })
}

/// Runs the full four-step pipeline: interpolate exposure poses, primary
/// coarse-to-fine sampling, scattering, blur synthesis, loss, backward,
/// update. The coarse network trains on its own primary-only loss added to
/// the fine loss. Returns the final state and the metrics log.
pub fn train(
    dataset: &Dataset,
    model: SceneModel,
    rcfg: &RenderConfig,
    ocfg: &OptimConfig,
    seed: u64,
) -> Result<(TrainState, Vec<MetricsRow>)> {
    rcfg.validate()?;
    let mut state = init_train_state(dataset, model, ocfg, seed)?;
    let mut rows = Vec::new();
    let start = Instant::now();
    let mut last_psnr = f64::NAN;

    for iter in 0..ocfg.iters {
        let image = iter % dataset.views.len();
        let view = &dataset.views[image];
        let n_pixels = view.blurred.width * view.blurred.height;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[SALT_BATCH, iter as u64]));
        let pixels: Vec<usize> =
            (0..ocfg.batch_rays).map(|_| rng.random_range(0..n_pixels)).collect();

        // scattering joins after the warmup
        let mut cfg_iter = rcfg.clone();
        cfg_iter.scattering_enabled = rcfg.scattering_enabled && iter >= ocfg.islm_warmup_iters;

        let (loss, grads) = batch_loss_and_grads(
            &state.model,
            dataset,
            &state.init_poses,
            &state.twists,
            &cfg_iter,
            ocfg,
            seed,
            iter as u64,
            &[BatchSpec { image, pixels }],
            true,
        )?;
        step(&mut state, &grads, ocfg)?;

        let iteration = iter + 1;
        if ocfg.eval_interval > 0 && iteration % ocfg.eval_interval == 0 {
            last_psnr = holdout_psnr(&state, dataset, &cfg_iter, ocfg.holdout_eval_count)?;
        }
        if ocfg.log_interval > 0 && iteration % ocfg.log_interval == 0 {
            rows.push(MetricsRow {
                iteration,
                loss,
                psnr_holdout: last_psnr,
                lr: lr_at(ocfg.lr_field, iter, ocfg),
                wall_seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok((state, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_of_equal_batches_is_zero() {
        let a = vec![Vec3::new(0.1, 0.2, 0.3); 5];
        assert_eq!(photometric_loss(&a, &a, false).unwrap(), 0.0);
    }

    #[test]
    fn loss_single_pixel_unit_error() {
        let pred = vec![Vec3::new(1.0, 0.0, 0.0)];
        let gt = vec![Vec3::ZERO];
        assert_eq!(photometric_loss(&pred, &gt, false).unwrap(), 1.0);
    }

    #[test]
    fn loss_matches_naive_double_loop() {
        let pred: Vec<Vec3> = (0..17)
            .map(|i| Vec3::new(i as f64 * 0.01, (i * 3 % 7) as f64 * 0.1, 0.5))
            .collect();
        let gt: Vec<Vec3> = (0..17)
            .map(|i| Vec3::new((i * 5 % 11) as f64 * 0.05, 0.2, i as f64 * 0.02))
            .collect();
        let mut oracle = 0.0;
        for (p, g) in pred.iter().zip(&gt) {
            for c in 0..3 {
                oracle += (p[c] - g[c]) * (p[c] - g[c]);
            }
        }
        assert!((photometric_loss(&pred, &gt, false).unwrap() - oracle).abs() < 1e-12);
        assert!(
            (photometric_loss(&pred, &gt, true).unwrap() - oracle / 51.0).abs() < 1e-12
        );
    }

    #[test]
    fn loss_shape_mismatch() {
        let a = vec![Vec3::ZERO; 2];
        let b = vec![Vec3::ZERO; 3];
        assert!(matches!(
            photometric_loss(&a, &b, false),
            Err(Error::LengthMismatch(2, 3))
        ));
    }

    #[test]
    fn adam_converges_on_a_quadratic() {
        // f(x) = (x - 3)^2, closed-form minimum at 3
        let mut params = vec![0.0];
        let mut moments = Moments::zeros(1);
        for t in 1..=2000 {
            let g = 2.0 * (params[0] - 3.0);
            let lr = 0.05 * 0.1f64.powf(t as f64 / 2000.0);
            adam_update(&mut params, &[g], &mut moments, lr, t);
        }
        assert!(
            (params[0] - 3.0).abs() < 1e-4,
            "converged to {} instead of 3",
            params[0]
        );
    }

    #[test]
    fn adam_zero_grads_leave_params() {
        let mut params = vec![1.5, -2.0];
        let mut moments = Moments::zeros(2);
        adam_update(&mut params, &[0.0, 0.0], &mut moments, 0.1, 1);
        assert_eq!(params, vec![1.5, -2.0]);
    }

    #[test]
    fn adam_group_learning_rates_scale_updates() {
        let mut a = vec![0.0];
        let mut b = vec![0.0];
        let mut ma = Moments::zeros(1);
        let mut mb = Moments::zeros(1);
        adam_update(&mut a, &[1.0], &mut ma, 0.1, 1);
        adam_update(&mut b, &[1.0], &mut mb, 0.01, 1);
        assert!((a[0] / b[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn lr_schedule_decays_to_factor() {
        let ocfg = OptimConfig { iters: 1000, lr_decay: 0.1, ..Default::default() };
        assert!((lr_at(1.0, 0, &ocfg) - 1.0).abs() < 1e-12);
        assert!((lr_at(1.0, 1000, &ocfg) - 0.1).abs() < 1e-12);
        assert!((lr_at(1.0, 500, &ocfg) - 0.1f64.sqrt()).abs() < 1e-12);
    }
}
