//! Motion-blur synthesis: average n virtual sharp renders along the
//! interpolated exposure trajectory.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

use crate::renderer::{render_image, Intrinsics, RenderConfig, SceneModel};
use crate::se3::{interpolate_pose, Pose};

/// Per-image exposure: start/end pose and the virtual image count.
#[derive(Clone, Debug)]
pub struct ExposureModel {
    pub start: Pose,
    pub end: Pose,
    pub n: usize,
}

impl ExposureModel {
    pub fn new(start: Pose, end: Pose, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidConfig("exposure needs n >= 1".into()));
        }
        // interpolation must be well-defined between the endpoints
        interpolate_pose(&start, &end, 0.5)?;
        Ok(ExposureModel { start, end, n })
    }
}

/// Interpolation fractions for the n sampled moments. The default follows
/// the interpolation formula literally (`t/n`, never reaching the end pose);
/// `inclusive` switches to `t/(n-1)` so the last virtual pose is the end
/// pose exactly.
pub fn exposure_fractions(n: usize, inclusive: bool) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    if inclusive {
        (0..n).map(|t| t as f64 / (n - 1) as f64).collect()
    } else {
        (0..n).map(|t| t as f64 / n as f64).collect()
    }
}

/// Virtual camera poses at the sampled moments.
pub fn virtual_poses(em: &ExposureModel, inclusive: bool) -> Result<Vec<Pose>> {
    exposure_fractions(em.n, inclusive)
        .into_iter()
        .map(|f| interpolate_pose(&em.start, &em.end, f))
        .collect()
}

/// Per-pixel arithmetic mean in linear RGB, before any quantization.
/// Accumulation runs in fixed index order for bit reproducibility.
pub fn synthesize_blur(images: &[ImageBuffer]) -> Result<ImageBuffer> {
    let first = images.first().ok_or_else(|| Error::InvalidConfig("empty image stack".into()))?;
    for img in &images[1..] {
        first.same_dims(img)?;
    }
    let mut out = ImageBuffer::new(first.width, first.height);
    for img in images {
        for (acc, v) in out.data.iter_mut().zip(&img.data) {
            *acc += v;
        }
    }
    let inv = 1.0 / images.len() as f64;
    for v in out.data.iter_mut() {
        *v *= inv;
    }
    Ok(out)
}

/// Renders the n virtual sharp images and averages them. Per-pose rng
/// streams are derived from `(seed, pose index)`. A static exposure
/// (start == end) is the mean of n identical images, which is the image
/// itself; that case renders once so the identity holds bit-for-bit.
#[allow(clippy::too_many_arguments)]
pub fn render_blurred(
    em: &ExposureModel,
    intr: &Intrinsics,
    model: &SceneModel,
    width: usize,
    height: usize,
    cfg: &RenderConfig,
    seed: u64,
    inclusive: bool,
) -> Result<ImageBuffer> {
    if em.start == em.end || em.n == 1 {
        return Ok(render_image(model, &em.start, intr, width, height, cfg, seed, 0));
    }
    let poses = virtual_poses(em, inclusive)?;
    let frames: Vec<ImageBuffer> = poses
        .iter()
        .enumerate()
        .map(|(t, pose)| render_image(model, pose, intr, width, height, cfg, seed, t as u64))
        .collect();
    synthesize_blur(&frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldParams, FieldShape};
    use crate::islm::{IslmParams, IslmShape};
    use crate::math::{Vec3, Vec3 as V};
    use crate::se3::{se3_exp, Twist};
    use proptest::prelude::*;

    fn translation(x: f64, y: f64, z: f64) -> Pose {
        se3_exp(&Twist::new(V::ZERO, V::new(x, y, z)).unwrap())
    }

    #[test]
    fn single_moment_returns_start() {
        let em = ExposureModel::new(translation(1.0, 0.0, 0.0), translation(2.0, 0.0, 0.0), 1).unwrap();
        let poses = virtual_poses(&em, false).unwrap();
        assert_eq!(poses.len(), 1);
        assert_eq!(poses[0], em.start);
    }

    #[test]
    fn two_moments_exclusive_stop_halfway() {
        let em = ExposureModel::new(Pose::identity(), translation(1.0, 0.0, 0.0), 2).unwrap();
        let poses = virtual_poses(&em, false).unwrap();
        assert!((poses[0].translation - V::ZERO).norm() < 1e-15);
        assert!((poses[1].translation - V::new(0.5, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn inclusive_mode_reaches_the_end_pose() {
        let em = ExposureModel::new(Pose::identity(), translation(1.0, 0.0, 0.0), 3).unwrap();
        let poses = virtual_poses(&em, true).unwrap();
        assert!((poses[2].translation - V::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn static_exposure_gives_identical_poses() {
        let t = translation(0.4, -0.2, 0.9);
        let em = ExposureModel::new(t, t, 5).unwrap();
        for p in virtual_poses(&em, false).unwrap() {
            assert_eq!(p, t);
        }
    }

    #[test]
    fn averaging_identical_images_is_identity() {
        let img = ImageBuffer::filled(4, 4, Vec3::new(0.25, 0.5, 0.75));
        let out = synthesize_blur(&[img.clone(), img.clone(), img.clone()]).unwrap();
        for (a, b) in out.data.iter().zip(&img.data) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn black_and_white_average_to_half() {
        let black = ImageBuffer::filled(3, 2, Vec3::ZERO);
        let white = ImageBuffer::filled(3, 2, Vec3::splat(1.0));
        let out = synthesize_blur(&[black, white]).unwrap();
        assert!(out.data.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn mean_matches_scalar_oracle() {
        let mut images = Vec::new();
        for s in 0..3u64 {
            let mut img = ImageBuffer::new(4, 3);
            for (i, v) in img.data.iter_mut().enumerate() {
                *v = ((i as u64 * 31 + s * 97) % 256) as f64 / 255.0;
            }
            images.push(img);
        }
        let out = synthesize_blur(&images).unwrap();
        for i in 0..out.data.len() {
            let oracle = (images[0].data[i] + images[1].data[i] + images[2].data[i]) / 3.0;
            assert!((out.data[i] - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = ImageBuffer::new(4, 4);
        let b = ImageBuffer::new(4, 5);
        assert!(matches!(
            synthesize_blur(&[a, b]),
            Err(Error::DimensionMismatch(4, 4, 4, 5))
        ));
    }

    #[test]
    fn static_camera_blur_is_bitwise_sharp() {
        let fshape = FieldShape { l_x: 2, l_d: 1, trunk: vec![16, 16], color_hidden: 8 };
        let model = SceneModel {
            coarse: FieldParams::seeded(fshape.clone(), 1),
            fine: FieldParams::seeded(fshape, 2),
            islm: IslmParams::seeded(IslmShape { l_x: 2, l_d: 1, hidden: vec![16], heads: 1 }, 3),
        };
        let cfg = RenderConfig {
            n_coarse: 6,
            n_fine: 6,
            k_paths: 3,
            n_scatter: 3,
            ..Default::default()
        };
        let pose = Pose::identity();
        let intr = Intrinsics { fx: 6.0, fy: 6.0, cx: 3.0, cy: 3.0 };
        let em = ExposureModel::new(pose, pose, 4).unwrap();
        let blurred = render_blurred(&em, &intr, &model, 6, 6, &cfg, 21, false).unwrap();
        let sharp = render_image(&model, &pose, &intr, 6, 6, &cfg, 21, 0);
        assert_eq!(blurred.data, sharp.data);
    }

    /// Brightness centroid of a blurred render of a translating camera lies
    /// between the centroids of the two endpoint sharp renders.
    #[test]
    fn translating_camera_blur_centroid_between_endpoints() {
        use crate::scene::{ground_truth_blurred, render_ground_truth, ExposureSpec, SynthConfig, SyntheticScene};
        use crate::field::AnalyticField;
        use crate::math::Aabb;
        use crate::se3::interpolate_pose;

        let scene = SyntheticScene {
            primitives: vec![AnalyticField::EmissiveSphere {
                center: V::new(0.0, 0.0, 0.0),
                radius: 0.25,
                sigma: 30.0,
                color: V::new(1.0, 1.0, 1.0),
            }],
            mirror: None,
            bounds: Aabb::unit(),
        };
        let start = crate::scene::look_at(V::new(-0.35, 0.0, 2.4), V::ZERO, V::new(0.0, 1.0, 0.0));
        let end = crate::scene::look_at(V::new(0.35, 0.0, 2.4), V::ZERO, V::new(0.0, 1.0, 0.0));
        let mid = interpolate_pose(&start, &end, 0.5).unwrap();
        let exposure = ExposureSpec { start, end, mid };
        let cfg = SynthConfig { width: 24, height: 24, n: 6, views: 1, gt_steps: 128, background: V::ZERO, focal: 26.0, ..Default::default() };
        let intr = cfg.intrinsics();

        let centroid_x = |img: &ImageBuffer| {
            let mut mass = 0.0;
            let mut acc = 0.0;
            for y in 0..img.height {
                for x in 0..img.width {
                    let p = img.pixel(x, y);
                    let lum = p.x + p.y + p.z;
                    mass += lum;
                    acc += lum * x as f64;
                }
            }
            acc / mass
        };
        let sharp_start = render_ground_truth(&scene, &start, &intr, 24, 24, 128, V::ZERO);
        let sharp_end = render_ground_truth(&scene, &end, &intr, 24, 24, 128, V::ZERO);
        let blurred = ground_truth_blurred(&scene, &exposure, &intr, &cfg).unwrap();
        let (cs, ce, cb) = (centroid_x(&sharp_start), centroid_x(&sharp_end), centroid_x(&blurred));
        let (lo, hi) = (cs.min(ce), cs.max(ce));
        assert!(
            cb > lo && cb < hi,
            "blurred centroid {cb} outside sharp centroids [{lo}, {hi}]"
        );
    }

    proptest! {
        #[test]
        fn prop_blur_range_containment(vals in prop::collection::vec(0.0f64..1.0, 24)) {
            let mut a = ImageBuffer::new(2, 2);
            let mut b = ImageBuffer::new(2, 2);
            a.data.copy_from_slice(&vals[..12]);
            b.data.copy_from_slice(&vals[12..]);
            let out = synthesize_blur(&[a.clone(), b.clone()]).unwrap();
            for i in 0..12 {
                let lo = a.data[i].min(b.data[i]);
                let hi = a.data[i].max(b.data[i]);
                prop_assert!(out.data[i] >= lo - 1e-12 && out.data[i] <= hi + 1e-12);
            }
        }

        #[test]
        fn prop_blur_linearity(vals in prop::collection::vec(0.0f64..1.0, 24), alpha in 0.0f64..2.0) {
            let mut a = ImageBuffer::new(2, 2);
            let mut b = ImageBuffer::new(2, 2);
            a.data.copy_from_slice(&vals[..12]);
            b.data.copy_from_slice(&vals[12..]);
            let mean = synthesize_blur(&[a.clone(), b.clone()]).unwrap();
            let mut sa = a.clone();
            let mut sb = b.clone();
            for v in sa.data.iter_mut() { *v *= alpha; }
            for v in sb.data.iter_mut() { *v *= alpha; }
            let scaled_mean = synthesize_blur(&[sa, sb]).unwrap();
            for i in 0..12 {
                prop_assert!((scaled_mean.data[i] - alpha * mean.data[i]).abs() < 1e-12);
            }
        }
    }
}
