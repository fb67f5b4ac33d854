//! Procedural ground-truth scenes with genuine scattering (a mirror plane)
//! and dataset generation: sharp ground-truth renders, motion-blurred
//! training inputs, pose files.
//!
//! The tracer composes straight-line quadrature with a single specular
//! bounce at the mirror — the physical lightpath the scattering model is
//! supposed to learn.

use crate::blur::exposure_fractions;
use crate::error::{Error, Result};
use crate::field::AnalyticField;
use crate::image::ImageBuffer;
use crate::math::{derive_seed, Aabb, Vec3};
use crate::parallel::for_each_chunk_mut;
use crate::renderer::Intrinsics;
use crate::se3::{interpolate_pose, se3_exp, Pose, Twist};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorPlane {
    pub point: Vec3,
    pub normal: Vec3,
    /// Fraction of reflected radiance in [0,1].
    pub reflectance: f64,
    /// Own (diffuse) color of the plane, weighted by `1 - reflectance`.
    pub base_color: Vec3,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScene {
    pub primitives: Vec<AnalyticField>,
    pub mirror: Option<MirrorPlane>,
    pub bounds: Aabb,
}

impl SyntheticScene {
    pub fn validate(&self) -> Result<()> {
        if let Some(m) = &self.mirror {
            if (m.normal.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidConfig("mirror normal must be unit length".into()));
            }
            if !(0.0..=1.0).contains(&m.reflectance) {
                return Err(Error::InvalidConfig("mirror reflectance must be in [0,1]".into()));
            }
        }
        Ok(())
    }

    pub fn field(&self) -> AnalyticField {
        AnalyticField::Union { parts: self.primitives.clone() }
    }
}

/// Default desk scene: two emissive spheres in front of a mirror plane plus
/// a thin rod (~2-3 px at 64x64) that exercises small-structure sampling.
/// The spheres' mirror images lie outside the scene bounds, so straight-line
/// rendering cannot explain the reflections with virtual geometry.
pub fn builtin_mirror_scene() -> SyntheticScene {
    SyntheticScene {
        primitives: vec![
            AnalyticField::EmissiveSphere {
                center: Vec3::new(-0.32, 0.08, 0.10),
                radius: 0.28,
                sigma: 24.0,
                color: Vec3::new(0.85, 0.22, 0.18),
            },
            AnalyticField::EmissiveSphere {
                center: Vec3::new(0.38, -0.12, 0.38),
                radius: 0.22,
                sigma: 24.0,
                color: Vec3::new(0.20, 0.45, 0.90),
            },
            AnalyticField::ConstantBox {
                min: Vec3::new(0.04, -0.45, 0.60),
                max: Vec3::new(0.12, 0.45, 0.68),
                sigma: 30.0,
                color: Vec3::new(0.95, 0.85, 0.25),
            },
        ],
        mirror: Some(MirrorPlane {
            point: Vec3::new(0.0, 0.0, -0.75),
            normal: Vec3::new(0.0, 0.0, 1.0),
            reflectance: 0.8,
            base_color: Vec3::new(0.06, 0.07, 0.08),
        }),
        bounds: Aabb::unit(),
    }
}

/// Midpoint-rule compositing of the analytic field over `[t0, t1]`.
/// Returns accumulated color and residual transmittance.
fn integrate_segment(
    field: &AnalyticField,
    origin: Vec3,
    dir: Vec3,
    t0: f64,
    t1: f64,
    steps: usize,
) -> (Vec3, f64) {
    if t1 <= t0 {
        return (Vec3::ZERO, 1.0);
    }
    let delta = (t1 - t0) / steps as f64;
    let mut color = Vec3::ZERO;
    let mut log_t = 0.0f64;
    for j in 0..steps {
        let t = t0 + (j as f64 + 0.5) * delta;
        let out = field.eval(origin + dir * t);
        let trans = (-log_t).exp();
        let alpha = 1.0 - (-out.sigma * delta).exp();
        color += out.color * (trans * alpha);
        log_t += out.sigma * delta;
    }
    (color, (-log_t).exp())
}

fn mirror_hit(scene: &SyntheticScene, origin: Vec3, dir: Vec3, t0: f64, t1: f64) -> Option<f64> {
    let m = scene.mirror.as_ref()?;
    let denom = dir.dot(m.normal);
    // only the front face reflects
    if denom >= -1e-9 {
        return None;
    }
    let t = (m.point - origin).dot(m.normal) / denom;
    (t > t0 && t < t1).then_some(t)
}

/// Ground-truth radiance of one ray: straight-line quadrature to the mirror
/// (if hit), then one specular bounce, no recursion.
pub fn trace_ground_truth(
    scene: &SyntheticScene,
    origin: Vec3,
    dir: Vec3,
    steps: usize,
    background: Vec3,
) -> Vec3 {
    let field = scene.field();
    let Some((enter, exit)) = scene.bounds.ray_range(origin, dir) else {
        return background;
    };
    let t0 = enter.max(1e-4);
    if t0 >= exit {
        return background;
    }

    match mirror_hit(scene, origin, dir, t0, exit) {
        Some(t_m) => {
            let m = scene.mirror.as_ref().unwrap();
            let (near_color, near_t) = integrate_segment(&field, origin, dir, t0, t_m, steps);
            let hit = origin + dir * t_m;
            let reflected = dir - m.normal * (2.0 * dir.dot(m.normal));
            let r_origin = hit + reflected * 1e-6;
            let bounce = match scene.bounds.ray_range(r_origin, reflected) {
                Some((re, rx)) => {
                    let r0 = re.max(0.0);
                    let (c2, t2) = integrate_segment(&field, r_origin, reflected, r0, rx, steps);
                    c2 + background * t2
                }
                None => background,
            };
            let mirror_radiance = m.base_color * (1.0 - m.reflectance) + bounce * m.reflectance;
            near_color + mirror_radiance * near_t
        }
        None => {
            let (color, t) = integrate_segment(&field, origin, dir, t0, exit, steps);
            color + background * t
        }
    }
}

/// Camera-to-world pose looking from `eye` toward `target` (+z forward,
/// image y down).
pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Pose {
    let f = (target - eye).normalized();
    let s = f.cross(up).normalized();
    let u = s.cross(f);
    let rotation = crate::math::Mat3 {
        m: [
            [s.x, -u.x, f.x],
            [s.y, -u.y, f.y],
            [s.z, -u.z, f.z],
        ],
    };
    Pose { rotation, translation: eye }
}

fn camera_dir(pose: &Pose, intr: &Intrinsics, px: usize, py: usize) -> Vec3 {
    let dir_cam = Vec3::new(
        (px as f64 + 0.5 - intr.cx) / intr.fx,
        (py as f64 + 0.5 - intr.cy) / intr.fy,
        1.0,
    );
    pose.rotation.mul_vec(dir_cam).normalized()
}

/// Ground-truth render of one full image.
pub fn render_ground_truth(
    scene: &SyntheticScene,
    pose: &Pose,
    intr: &Intrinsics,
    width: usize,
    height: usize,
    steps: usize,
    background: Vec3,
) -> ImageBuffer {
    let mut img = ImageBuffer::new(width, height);
    let stride = width * 3;
    for_each_chunk_mut(&mut img.data, stride, |py, row| {
        for px in 0..width {
            let dir = camera_dir(pose, intr, px, py);
            let c = trace_ground_truth(scene, pose.translation, dir, steps, background);
            row[3 * px] = c.x;
            row[3 * px + 1] = c.y;
            row[3 * px + 2] = c.z;
        }
    });
    img
}

/// Pixels whose primary ray hits the mirror plane inside the bounds.
pub fn mirror_mask(
    scene: &SyntheticScene,
    pose: &Pose,
    intr: &Intrinsics,
    width: usize,
    height: usize,
) -> Vec<bool> {
    let mut mask = vec![false; width * height];
    for py in 0..height {
        for px in 0..width {
            let dir = camera_dir(pose, intr, px, py);
            if let Some((enter, exit)) = scene.bounds.ray_range(pose.translation, dir) {
                let t0 = enter.max(1e-4);
                mask[py * width + px] =
                    mirror_hit(scene, pose.translation, dir, t0, exit).is_some();
            }
        }
    }
    mask
}

fn primitive_ray_range(prim: &AnalyticField, origin: Vec3, dir: Vec3) -> Option<(f64, f64)> {
    match prim {
        AnalyticField::ConstantBox { min, max, .. } => {
            Aabb { min: *min, max: *max }.ray_range(origin, dir)
        }
        AnalyticField::EmissiveSphere { center, radius, .. } => {
            let oc = origin - *center;
            let b = oc.dot(dir);
            let c = oc.norm_squared() - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            Some((-b - sq, -b + sq))
        }
        AnalyticField::Union { .. } => None,
    }
}

/// Pixels whose primary ray passes through primitive `index` before any
/// mirror hit.
pub fn primitive_mask(
    scene: &SyntheticScene,
    index: usize,
    pose: &Pose,
    intr: &Intrinsics,
    width: usize,
    height: usize,
) -> Vec<bool> {
    let mut mask = vec![false; width * height];
    let Some(prim) = scene.primitives.get(index) else {
        return mask;
    };
    for py in 0..height {
        for px in 0..width {
            let dir = camera_dir(pose, intr, px, py);
            let Some((enter, exit)) = scene.bounds.ray_range(pose.translation, dir) else {
                continue;
            };
            let t0 = enter.max(1e-4);
            let horizon = mirror_hit(scene, pose.translation, dir, t0, exit).unwrap_or(exit);
            if let Some((h0, h1)) = primitive_ray_range(prim, pose.translation, dir) {
                mask[py * width + px] = h1 > t0 && h0 < horizon;
            }
        }
    }
    mask
}

/// Camera-path description for dataset synthesis: an azimuth arc around the
/// target with per-image exposures spanning `blur_deg` of the arc plus a
/// small seeded end-pose jitter.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySpec {
    pub radius: f64,
    pub height: f64,
    pub arc_deg: f64,
    pub target: Vec3,
    pub blur_deg: f64,
    pub jitter_rot_deg: f64,
    pub jitter_trans: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            radius: 2.6,
            height: 0.15,
            arc_deg: 64.0,
            target: Vec3::new(0.0, 0.0, -0.1),
            blur_deg: 2.4,
            jitter_rot_deg: 0.6,
            jitter_trans: 0.02,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    /// Virtual images averaged per exposure.
    pub n: usize,
    pub views: usize,
    pub seed: u64,
    /// Quadrature steps of the ground-truth tracer.
    pub gt_steps: usize,
    pub background: Vec3,
    pub focal: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 64,
            height: 64,
            n: 8,
            views: 20,
            seed: 42,
            gt_steps: 512,
            background: Vec3::new(0.02, 0.02, 0.03),
            focal: 70.0,
        }
    }
}

impl SynthConfig {
    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics {
            fx: self.focal,
            fy: self.focal,
            cx: self.width as f64 / 2.0,
            cy: self.height as f64 / 2.0,
        }
    }
}

/// One generated exposure: start/end poses plus the held-out midpoint pose.
#[derive(Clone, Debug)]
pub struct ExposureSpec {
    pub start: Pose,
    pub end: Pose,
    pub mid: Pose,
}

/// Deterministic exposure poses for every view.
pub fn trajectory_exposures(
    traj: &TrajectorySpec,
    views: usize,
    seed: u64,
) -> Result<Vec<ExposureSpec>> {
    let mut out = Vec::with_capacity(views);
    let arc = traj.arc_deg.to_radians();
    let blur = traj.blur_deg.to_radians();
    let up = Vec3::new(0.0, 1.0, 0.0);
    for i in 0..views {
        let frac = if views > 1 { i as f64 / (views - 1) as f64 } else { 0.5 };
        let phi = -arc / 2.0 + frac * arc;
        let eye_at = |angle: f64| {
            Vec3::new(traj.radius * angle.sin(), traj.height, traj.radius * angle.cos())
        };
        let start = look_at(eye_at(phi - blur / 2.0), traj.target, up);
        let end_base = look_at(eye_at(phi + blur / 2.0), traj.target, up);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x7261_6a00, i as u64]));
        let rot = traj.jitter_rot_deg.to_radians();
        let jitter = Twist::new(
            Vec3::new(
                rng.random_range(-rot..=rot),
                rng.random_range(-rot..=rot),
                rng.random_range(-rot..=rot),
            ),
            Vec3::new(
                rng.random_range(-traj.jitter_trans..=traj.jitter_trans),
                rng.random_range(-traj.jitter_trans..=traj.jitter_trans),
                rng.random_range(-traj.jitter_trans..=traj.jitter_trans),
            ),
        )?;
        let end = crate::se3::compose(&end_base, &se3_exp(&jitter));
        let mid = interpolate_pose(&start, &end, 0.5)?;
        out.push(ExposureSpec { start, end, mid });
    }
    Ok(out)
}

/// Renders one motion-blurred exposure from ground truth: the mean of `n`
/// sharp renders at the interpolated moments.
pub fn ground_truth_blurred(
    scene: &SyntheticScene,
    exposure: &ExposureSpec,
    intr: &Intrinsics,
    cfg: &SynthConfig,
) -> Result<ImageBuffer> {
    let fractions = exposure_fractions(cfg.n, false);
    let mut acc = ImageBuffer::new(cfg.width, cfg.height);
    for f in &fractions {
        let pose = interpolate_pose(&exposure.start, &exposure.end, *f)?;
        let img = render_ground_truth(
            scene,
            &pose,
            intr,
            cfg.width,
            cfg.height,
            cfg.gt_steps,
            cfg.background,
        );
        for (a, v) in acc.data.iter_mut().zip(&img.data) {
            *a += v;
        }
    }
    let inv = 1.0 / fractions.len() as f64;
    for v in acc.data.iter_mut() {
        *v *= inv;
    }
    Ok(acc)
}

/// Writes the dataset: M blurred training images, M held-out sharp images at
/// exposure midpoints, `poses.json` and `scene.json`. Deterministic under
/// the seed.
pub fn generate_dataset(
    scene: &SyntheticScene,
    traj: &TrajectorySpec,
    cfg: &SynthConfig,
    out_dir: &Path,
) -> Result<()> {
    scene.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let intr = cfg.intrinsics();
    let exposures = trajectory_exposures(traj, cfg.views, cfg.seed)?;

    let mut images = Vec::with_capacity(cfg.views);
    let mut holdout = Vec::with_capacity(cfg.views);
    for (i, exposure) in exposures.iter().enumerate() {
        let blur_name = format!("blur_{i:03}.png");
        let sharp_name = format!("sharp_{i:03}.png");
        let blurred = ground_truth_blurred(scene, exposure, &intr, cfg)?;
        blurred.write_png(&out_dir.join(&blur_name))?;
        let sharp = render_ground_truth(
            scene,
            &exposure.mid,
            &intr,
            cfg.width,
            cfg.height,
            cfg.gt_steps,
            cfg.background,
        );
        sharp.write_png(&out_dir.join(&sharp_name))?;
        images.push(crate::io::ExposureEntry {
            file: blur_name,
            t_start: exposure.start.to_matrix4(),
            t_end: exposure.end.to_matrix4(),
            intrinsics: intr,
            n: cfg.n,
        });
        holdout.push(crate::io::HoldoutEntry {
            file: sharp_name,
            pose: exposure.mid.to_matrix4(),
            intrinsics: intr,
        });
    }
    crate::io::write_poses(&out_dir.join("poses.json"), &crate::io::PosesFile { images, holdout })?;
    let scene_json = serde_json::to_string_pretty(scene)?;
    std::fs::write(out_dir.join("scene.json"), scene_json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renderer::weigh_samples;
    use crate::sampler::RaySampleSet;

    fn test_intr() -> Intrinsics {
        Intrinsics { fx: 18.0, fy: 18.0, cx: 8.0, cy: 8.0 }
    }

    #[test]
    fn no_mirror_reduces_to_quadrature() {
        let scene = SyntheticScene {
            primitives: vec![AnalyticField::EmissiveSphere {
                center: Vec3::new(0.0, 0.0, 0.0),
                radius: 0.4,
                sigma: 8.0,
                color: Vec3::new(0.9, 0.1, 0.2),
            }],
            mirror: None,
            bounds: Aabb::unit(),
        };
        let origin = Vec3::new(0.0, 0.0, 2.5);
        let dir = Vec3::new(0.0, 0.0, -1.0);
        let bg = Vec3::splat(0.1);
        let steps = 512;
        let traced = trace_ground_truth(&scene, origin, dir, steps, bg);

        // same integral through the renderer's weighting machinery
        let (enter, exit) = scene.bounds.ray_range(origin, dir).unwrap();
        let t0 = enter.max(1e-4);
        let field = scene.field();
        let mut set = RaySampleSet::default();
        let delta = (exit - t0) / steps as f64;
        for j in 0..steps {
            let t = t0 + (j as f64 + 0.5) * delta;
            let out = field.eval(origin + dir * t);
            set.t_values.push(t);
            set.sigmas.push(out.sigma);
            set.colors.push(out.color);
        }
        weigh_samples(&mut set, exit + delta / 2.0);
        let rendered = crate::renderer::render_primary(&set, bg);
        assert!((traced - rendered).norm() < 1e-3, "{traced:?} vs {rendered:?}");
    }

    #[test]
    fn perfect_mirror_shows_the_sphere() {
        // big bounds so the virtual image stays inside
        let bounds = Aabb { min: Vec3::splat(-2.0), max: Vec3::splat(2.0) };
        let sphere = AnalyticField::EmissiveSphere {
            center: Vec3::new(0.0, 0.0, 0.8),
            radius: 0.3,
            sigma: 50.0,
            color: Vec3::new(0.0, 1.0, 0.0),
        };
        let scene_mirror = SyntheticScene {
            primitives: vec![sphere.clone()],
            mirror: Some(MirrorPlane {
                point: Vec3::ZERO,
                normal: Vec3::new(0.0, 0.0, 1.0),
                reflectance: 1.0,
                base_color: Vec3::ZERO,
            }),
            bounds,
        };
        // ray that misses the real sphere, hits the mirror, and whose straight
        // continuation passes through the virtual image
        let origin = Vec3::new(0.9, 0.0, 1.5);
        let dir = (Vec3::new(0.25, 0.0, 0.0) - origin).normalized();
        let bg = Vec3::ZERO;
        let seen = trace_ground_truth(&scene_mirror, origin, dir, 8192, bg);

        // reciprocity: the direct image of the mirrored sphere, no mirror
        let scene_virtual = SyntheticScene {
            primitives: vec![AnalyticField::EmissiveSphere {
                center: Vec3::new(0.0, 0.0, -0.8),
                radius: 0.3,
                sigma: 50.0,
                color: Vec3::new(0.0, 1.0, 0.0),
            }],
            mirror: None,
            bounds,
        };
        let virtual_seen = trace_ground_truth(&scene_virtual, origin, dir, 8192, bg);
        assert!(
            (seen - virtual_seen).norm() < 1e-3,
            "mirror {seen:?} vs virtual {virtual_seen:?}"
        );
        assert!(seen.y > 0.05, "reflected sphere should be visible, got {seen:?}");
    }

    #[test]
    fn zero_reflectance_hides_the_mirror_world() {
        let mut scene = builtin_mirror_scene();
        if let Some(m) = scene.mirror.as_mut() {
            m.reflectance = 0.0;
        }
        // a ray that hits only the mirror
        let origin = Vec3::new(0.0, 0.6, 2.5);
        let dir = (Vec3::new(0.0, 0.55, -0.75) - origin).normalized();
        let c = trace_ground_truth(&scene, origin, dir, 512, Vec3::ZERO);
        let m = scene.mirror.unwrap();
        assert!((c - m.base_color).norm() < 5e-2, "{c:?}");
    }

    #[test]
    fn reciprocity_of_full_images() {
        let bounds = Aabb { min: Vec3::splat(-2.0), max: Vec3::splat(2.0) };
        let mk = |z: f64| AnalyticField::EmissiveSphere {
            center: Vec3::new(0.1, 0.05, z),
            radius: 0.35,
            sigma: 30.0,
            color: Vec3::new(0.2, 0.8, 0.4),
        };
        let with_mirror = SyntheticScene {
            primitives: vec![mk(0.7)],
            mirror: Some(MirrorPlane {
                point: Vec3::ZERO,
                normal: Vec3::new(0.0, 0.0, 1.0),
                reflectance: 1.0,
                base_color: Vec3::ZERO,
            }),
            bounds,
        };
        let with_virtual = SyntheticScene {
            primitives: vec![mk(0.7), mk(-0.7)],
            mirror: None,
            bounds,
        };
        let pose = look_at(Vec3::new(0.3, 0.2, 1.9), Vec3::new(0.0, 0.0, -0.5), Vec3::new(0.0, 1.0, 0.0));
        let intr = test_intr();
        let a = render_ground_truth(&with_mirror, &pose, &intr, 16, 16, 8192, Vec3::ZERO);
        let b = render_ground_truth(&with_virtual, &pose, &intr, 16, 16, 8192, Vec3::ZERO);
        // direct sphere looks the same in both; mirror pixels show the virtual sphere
        let mut max_err = 0.0f64;
        for (x, y) in a.data.iter().zip(&b.data) {
            max_err = max_err.max((x - y).abs());
        }
        assert!(max_err < 1.5e-3, "max pixel error {max_err}");
    }

    #[test]
    fn masks_cover_expected_regions() {
        let scene = builtin_mirror_scene();
        let pose = look_at(
            Vec3::new(0.0, 0.15, 2.6),
            Vec3::new(0.0, 0.0, -0.1),
            Vec3::new(0.0, 1.0, 0.0),
        );
        let intr = Intrinsics { fx: 70.0, fy: 70.0, cx: 32.0, cy: 32.0 };
        let mirror = mirror_mask(&scene, &pose, &intr, 64, 64);
        let n_mirror = mirror.iter().filter(|m| **m).count();
        assert!(n_mirror > 200, "mirror should cover a large region, got {n_mirror}");
        let rod = primitive_mask(&scene, 2, &pose, &intr, 64, 64);
        let n_rod = rod.iter().filter(|m| **m).count();
        assert!(n_rod > 10 && n_rod < 600, "rod pixels: {n_rod}");
    }

    #[test]
    fn static_trajectory_blur_equals_sharp() {
        let scene = builtin_mirror_scene();
        let traj = TrajectorySpec { blur_deg: 0.0, jitter_rot_deg: 0.0, jitter_trans: 0.0, ..Default::default() };
        let cfg = SynthConfig { width: 12, height: 12, n: 3, views: 1, gt_steps: 64, ..Default::default() };
        let intr = cfg.intrinsics();
        let exposures = trajectory_exposures(&traj, 1, 7).unwrap();
        let blurred = ground_truth_blurred(&scene, &exposures[0], &intr, &cfg).unwrap();
        let sharp = render_ground_truth(&scene, &exposures[0].mid, &intr, 12, 12, 64, cfg.background);
        for (a, b) in blurred.data.iter().zip(&sharp.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn blurred_is_mean_of_virtual_sharps() {
        let scene = builtin_mirror_scene();
        let traj = TrajectorySpec::default();
        let cfg = SynthConfig { width: 8, height: 8, n: 4, views: 2, gt_steps: 48, ..Default::default() };
        let intr = cfg.intrinsics();
        let ex = &trajectory_exposures(&traj, 2, 3).unwrap()[1];
        let blurred = ground_truth_blurred(&scene, ex, &intr, &cfg).unwrap();
        let mut acc = vec![0.0; 8 * 8 * 3];
        for f in exposure_fractions(4, false) {
            let pose = interpolate_pose(&ex.start, &ex.end, f).unwrap();
            let img = render_ground_truth(&scene, &pose, &intr, 8, 8, 48, cfg.background);
            for (a, v) in acc.iter_mut().zip(&img.data) {
                *a += v / 4.0;
            }
        }
        for (a, b) in blurred.data.iter().zip(&acc) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
