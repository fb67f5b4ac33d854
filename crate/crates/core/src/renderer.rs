//! Volume rendering: the classic straight-line renderer and its
//! scattering-aware extension
//! `C_hat = C_p + sum_k sum_i T_ki (1 - exp(-sigma_ki l_k)) c_ki`.
//!
//! The scattering term is applied literally as written: it is not weighted by
//! the primary-path transmittance at the scattering origin (the path
//! transmittance T_ki is what suppresses invalid paths); `weighted_scatter`
//! applies that extra factor as a study knob. Residual transmittance times
//! the background color is composited so rays that exit the volume have a
//! defined color. Nothing is clamped inside the renderer; clamping happens
//! only at 8-bit image encode.

use crate::error::{Error, Result};
use crate::field::FieldParams;
use crate::image::ImageBuffer;
use crate::islm::{IntervalBounds, IslmParams};
use crate::math::{derive_seed, Aabb, Vec3};
use crate::parallel::for_each_chunk_mut;
use crate::sampler::{Ray, RaySampleSet};
use crate::se3::Pose;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Pinhole intrinsics; rays go through pixel centers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub n_coarse: usize,
    pub n_fine: usize,
    /// Number of scattering paths K (odd when scattering is enabled).
    pub k_paths: usize,
    /// Samples per scattering path N_t.
    pub n_scatter: usize,
    pub interval: IntervalBounds,
    pub background: Vec3,
    pub scattering_enabled: bool,
    /// Ablation: grow all K paths from the single argmax origin, one output
    /// head per path, instead of one path from each of K adjacent origins.
    pub single_point: bool,
    /// Study knob: weight the scattering term by the primary transmittance
    /// at the scattering origin.
    pub weighted_scatter: bool,
    /// Scene bounds; positions are normalized by them to [-1,1]^3 before
    /// encoding.
    pub bounds: Aabb,
    /// Fixed sample range along every ray. A constant range keeps sample
    /// placement independent of the (optimized) poses, so gradients reach
    /// the pose only through sample values.
    pub t_near: f64,
    pub t_far: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            n_coarse: 32,
            n_fine: 32,
            k_paths: 5,
            n_scatter: 8,
            interval: IntervalBounds::default(),
            background: Vec3::splat(0.0),
            scattering_enabled: true,
            single_point: false,
            weighted_scatter: false,
            bounds: Aabb::unit(),
            t_near: 1.2,
            t_far: 3.8,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_coarse < 2 {
            return Err(Error::InvalidConfig("n_coarse must be >= 2".into()));
        }
        if !(self.t_near < self.t_far) {
            return Err(Error::InvalidConfig("t_near must be below t_far".into()));
        }
        if self.scattering_enabled {
            if self.k_paths == 0 || self.n_scatter == 0 {
                return Err(Error::InvalidConfig(
                    "k_paths and n_scatter must be >= 1 when scattering is enabled".into(),
                ));
            }
            if self.k_paths % 2 == 0 {
                return Err(Error::InvalidConfig("k_paths must be odd".into()));
            }
        }
        self.interval.validate()
    }
}

/// The three trained networks.
#[derive(Clone, Debug)]
pub struct SceneModel {
    pub coarse: FieldParams,
    pub fine: FieldParams,
    pub islm: IslmParams,
}

/// Ray through the center of pixel (px, py) over the configured fixed sample
/// range, plus the camera-frame direction and pre-normalization norm needed
/// to chain gradients back onto the pose.
pub fn pixel_ray_with_gen(
    pose: &Pose,
    intr: &Intrinsics,
    px: usize,
    py: usize,
    cfg: &RenderConfig,
) -> (Ray, Vec3, f64) {
    let dir_cam = Vec3::new(
        (px as f64 + 0.5 - intr.cx) / intr.fx,
        (py as f64 + 0.5 - intr.cy) / intr.fy,
        1.0,
    );
    let u = pose.rotation.mul_vec(dir_cam);
    let u_norm = u.norm();
    let dir = u / u_norm;
    (
        Ray { origin: pose.translation, direction: dir, t_near: cfg.t_near, t_far: cfg.t_far },
        dir_cam,
        u_norm,
    )
}

/// Ray through the center of pixel (px, py).
pub fn pixel_ray(pose: &Pose, intr: &Intrinsics, px: usize, py: usize, cfg: &RenderConfig) -> Ray {
    pixel_ray_with_gen(pose, intr, px, py, cfg).0
}

/// Prefix transmittance `T_i = exp(-sum_{j<i} sigma_j delta_j)`, running sum
/// kept in log space. `T_1 = 1`. Also returns the residual transmittance
/// after the last sample.
pub fn transmittance_prefix(sigmas: &[f64], deltas: &[f64]) -> Result<(Vec<f64>, f64)> {
    if sigmas.len() != deltas.len() {
        return Err(Error::LengthMismatch(sigmas.len(), deltas.len()));
    }
    let mut out = Vec::with_capacity(sigmas.len());
    let mut acc = 0.0f64;
    for (sigma, delta) in sigmas.iter().zip(deltas) {
        out.push((-acc).exp());
        acc += sigma * delta;
    }
    Ok((out, (-acc).exp()))
}

/// Fills deltas, transmittance and weights of a sample set whose t-values,
/// sigmas and colors are already populated. The final interval extends to
/// `t_far`.
pub fn weigh_samples(set: &mut RaySampleSet, t_far: f64) {
    let n = set.t_values.len();
    set.deltas.clear();
    for i in 0..n {
        let next = if i + 1 < n { set.t_values[i + 1] } else { t_far };
        set.deltas.push((next - set.t_values[i]).max(0.0));
    }
    let (trans, t_final) =
        transmittance_prefix(&set.sigmas, &set.deltas).expect("lengths match by construction");
    set.weights.clear();
    for i in 0..n {
        let alpha = 1.0 - (-set.sigmas[i] * set.deltas[i]).exp();
        set.weights.push(trans[i] * alpha);
    }
    set.transmittance = trans;
    set.t_final = t_final;
}

/// `C_p = sum_i w_i c_i + T_final * background`.
pub fn render_primary(samples: &RaySampleSet, background: Vec3) -> Vec3 {
    let mut color = Vec3::ZERO;
    for (w, c) in samples.weights.iter().zip(&samples.colors) {
        color += *c * *w;
    }
    color + background * samples.t_final
}

/// Scattering-path contribution of one path with equidistant interval `l`:
/// `sum_j T_j (1 - exp(-sigma_j l)) c_j` with `T_1 = 1`.
pub fn scatter_path_term(sigmas: &[f64], colors: &[Vec3], l: f64) -> Vec3 {
    let mut acc = Vec3::ZERO;
    let mut log_t = 0.0f64;
    for (sigma, color) in sigmas.iter().zip(colors) {
        let t = (-log_t).exp();
        acc += *color * (t * (1.0 - (-sigma * l).exp()));
        log_t += sigma * l;
    }
    acc
}

/// Output of one full pixel render.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelRender {
    /// Scatter-aware color (equals `primary` when scattering is disabled).
    pub color: Vec3,
    /// Classic renderer output on the fine samples (with background).
    pub primary: Vec3,
    /// Coarse-network primary color (with background).
    pub coarse: Vec3,
    /// Eq.-style scattering term before background compositing.
    pub scatter: Vec3,
}

/// Full coarse-to-fine scatter-aware render of one ray. Scattering disabled
/// (or `k_paths == 0`) reproduces the classic renderer bit-for-bit. This is
/// the recorded forward pass of the optimizer behind a reusable trace, so
/// training and inference share one numeric path.
pub fn render_pixel(
    model: &SceneModel,
    ray: &Ray,
    cfg: &RenderConfig,
    rng: &mut ChaCha8Rng,
    trace: &mut crate::backprop::RayTrace,
) -> PixelRender {
    crate::backprop::forward_traced(model, ray, cfg, rng, trace);
    trace.out
}

/// Renders one image, one ray per pixel center, pixels evaluated in parallel
/// when the `parallel` feature is on. The per-pixel rng stream is derived
/// from `(seed, pose_salt, pixel index)` so the result does not depend on
/// execution order.
pub fn render_image(
    model: &SceneModel,
    pose: &Pose,
    intr: &Intrinsics,
    width: usize,
    height: usize,
    cfg: &RenderConfig,
    seed: u64,
    pose_salt: u64,
) -> ImageBuffer {
    let mut img = ImageBuffer::new(width, height);
    let stride = width * 3;
    for_each_chunk_mut(&mut img.data, stride, |py, row| {
        let mut trace = crate::backprop::RayTrace::new(model);
        for px in 0..width {
            let pixel_index = (py * width + px) as u64;
            let ray = pixel_ray(pose, intr, px, py, cfg);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[pose_salt, pixel_index]));
            let color = render_pixel(model, &ray, cfg, &mut rng, &mut trace).color;
            row[3 * px] = color.x;
            row[3 * px + 1] = color.y;
            row[3 * px + 2] = color.z;
        }
    });
    img
}
