//! Sample placement along primary rays: stratified coarse draws, inverse-CDF
//! fine resampling over the coarse weight PDF, and selection of the adjacent
//! scattering origins.
//!
//! Sample placement is intentionally non-differentiable; the optimizer treats
//! every t-value produced here as a constant.

use crate::error::{Error, Result};
use crate::math::Vec3;
use rand::Rng;

/// Uniform per-bin floor added to the fine-sampling PDF.
const PDF_FLOOR: f64 = 1e-5;

/// Primary camera ray clipped to the scene bounds.
#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t_near: f64, t_far: f64) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "ray direction norm {} not unit",
                direction.norm()
            )));
        }
        if !(t_near < t_far) {
            return Err(Error::InvalidConfig(format!(
                "ray range [{t_near}, {t_far}] is empty"
            )));
        }
        Ok(Ray { origin, direction, t_near, t_far })
    }

    #[inline]
    pub fn point_at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Per-sample state of one rendered ray: ascending t-values, intervals,
/// field outputs and the rendering weights `w_i = T_i (1 - exp(-sigma_i delta_i))`.
#[derive(Clone, Debug, Default)]
pub struct RaySampleSet {
    pub t_values: Vec<f64>,
    pub deltas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub colors: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Prefix transmittance T_i (T_1 = 1).
    pub transmittance: Vec<f64>,
    /// Residual transmittance after the last sample.
    pub t_final: f64,
}

impl RaySampleSet {
    pub fn len(&self) -> usize {
        self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_values.is_empty()
    }

    pub fn clear(&mut self) {
        self.t_values.clear();
        self.deltas.clear();
        self.sigmas.clear();
        self.colors.clear();
        self.weights.clear();
        self.transmittance.clear();
        self.t_final = 1.0;
    }
}

/// One uniform draw per equal-width bin of `[t_near, t_far]`.
pub fn stratified_samples(ray: &Ray, n_coarse: usize, rng: &mut impl Rng) -> Vec<f64> {
    debug_assert!(n_coarse >= 2);
    let width = (ray.t_far - ray.t_near) / n_coarse as f64;
    (0..n_coarse)
        .map(|i| ray.t_near + (i as f64 + rng.random::<f64>()) * width)
        .collect()
}

/// Bin edges for the piecewise-constant weight PDF: range endpoints plus
/// midpoints between consecutive samples, one bin per coarse sample.
fn weight_bins(t_values: &[f64], range: (f64, f64)) -> Vec<f64> {
    let mut edges = Vec::with_capacity(t_values.len() + 1);
    edges.push(range.0);
    for pair in t_values.windows(2) {
        edges.push(0.5 * (pair[0] + pair[1]));
    }
    edges.push(range.1);
    edges
}

/// Inverse-CDF draws proportional to `weights + PDF_FLOOR` per bin. All-zero
/// weights fall back to the uniform PDF without surfacing an error.
pub fn fine_t_draws(
    t_values: &[f64],
    weights: &[f64],
    range: (f64, f64),
    n_fine: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    debug_assert_eq!(t_values.len(), weights.len());
    let edges = weight_bins(t_values, range);
    let total: f64 = weights.iter().sum();
    let pdf: Vec<f64> = if total > 0.0 {
        weights.iter().map(|w| w.max(0.0) + PDF_FLOOR).collect()
    } else {
        vec![1.0; weights.len()]
    };
    let mass: f64 = pdf.iter().sum();

    let mut cdf = Vec::with_capacity(pdf.len() + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for p in &pdf {
        acc += p / mass;
        cdf.push(acc);
    }
    *cdf.last_mut().unwrap() = 1.0;

    (0..n_fine)
        .map(|_| {
            let u: f64 = rng.random();
            let bin = match cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                Ok(i) => i.min(pdf.len() - 1),
                Err(i) => i.saturating_sub(1).min(pdf.len() - 1),
            };
            let lo = cdf[bin];
            let hi = cdf[bin + 1];
            let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.5 };
            edges[bin] + frac * (edges[bin + 1] - edges[bin])
        })
        .collect()
}

/// Fine pass t-values: importance draws merged and sorted with the coarse ones.
pub fn resample_fine(
    coarse: &RaySampleSet,
    range: (f64, f64),
    n_fine: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut merged = coarse.t_values.clone();
    merged.extend(fine_t_draws(&coarse.t_values, &coarse.weights, range, n_fine, rng));
    merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
    merged
}

/// `k` consecutive indices centered on the argmax weight, clamped to stay in
/// range; ties break toward the smaller index.
pub fn select_scatter_origins(weights: &[f64], k: usize) -> Result<std::ops::Range<usize>> {
    if weights.len() < k {
        return Err(Error::TooFewSamples { need: k, got: weights.len() });
    }
    let mut best = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > weights[best] {
            best = i;
        }
    }
    let start = best.saturating_sub(k / 2).min(weights.len() - k);
    Ok(start..start + k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Degenerate rng whose uniform draws are all 0.5.
    pub(crate) struct MidRng;

    impl rand::RngCore for MidRng {
        fn next_u32(&mut self) -> u32 {
            u32::MAX / 2
        }
        fn next_u64(&mut self) -> u64 {
            u64::MAX / 2
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0x7f);
        }
    }

    fn unit_ray() -> Ray {
        Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), 0.0, 1.0).unwrap()
    }

    #[test]
    fn midpoint_rng_yields_bin_midpoints() {
        let ts = stratified_samples(&unit_ray(), 2, &mut MidRng);
        assert!((ts[0] - 0.25).abs() < 1e-9);
        assert!((ts[1] - 0.75).abs() < 1e-9);
    }

    #[test]
    fn stratified_samples_stay_in_their_bins() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ts = stratified_samples(&unit_ray(), 4, &mut rng);
        for (i, t) in ts.iter().enumerate() {
            let lo = i as f64 / 4.0;
            let hi = (i + 1) as f64 / 4.0;
            assert!(*t >= lo && *t < hi, "sample {t} outside [{lo}, {hi})");
        }
    }

    #[test]
    fn stratified_is_deterministic_under_seed() {
        let a = stratified_samples(&unit_ray(), 16, &mut ChaCha8Rng::seed_from_u64(11));
        let b = stratified_samples(&unit_ray(), 16, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    fn coarse_with_weights(weights: Vec<f64>) -> RaySampleSet {
        let n = weights.len();
        let t_values: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        RaySampleSet {
            t_values,
            weights,
            ..Default::default()
        }
    }

    #[test]
    fn point_mass_keeps_fine_samples_in_peak_bin() {
        let mut weights = vec![0.0; 16];
        weights[9] = 1.0;
        let coarse = coarse_with_weights(weights);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws = fine_t_draws(&coarse.t_values, &coarse.weights, (0.0, 1.0), 64, &mut rng);
        // bin 9 spans the midpoints around t = 9.5/16
        let lo = 0.5 * (coarse.t_values[8] + coarse.t_values[9]);
        let hi = 0.5 * (coarse.t_values[9] + coarse.t_values[10]);
        assert!(draws.iter().all(|t| *t >= lo && *t <= hi));
    }

    #[test]
    fn all_zero_weights_fall_back_to_uniform() {
        let coarse = coarse_with_weights(vec![0.0; 8]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = fine_t_draws(&coarse.t_values, &coarse.weights, (0.0, 1.0), 4000, &mut rng);
        assert!(draws.iter().all(|t| (0.0..=1.0).contains(t)));
        // crude spread check: each quarter of the range gets a decent share
        for q in 0..4 {
            let lo = q as f64 * 0.25;
            let n = draws.iter().filter(|t| **t >= lo && **t < lo + 0.25).count();
            assert!(n > 800, "quarter {q} got {n} of 4000");
        }
    }

    /// Chi-square uniformity of the inverse-CDF sampler under uniform weights:
    /// 16 bins, dof 15, critical value at p = 0.01 is 30.5779.
    #[test]
    fn uniform_weights_pass_chi_square() {
        let coarse = coarse_with_weights(vec![0.25; 16]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n_draws = 10_000usize;
        let draws = fine_t_draws(&coarse.t_values, &coarse.weights, (0.0, 1.0), n_draws, &mut rng);
        let edges = weight_bins(&coarse.t_values, (0.0, 1.0));
        let mut counts = vec![0usize; 16];
        for t in &draws {
            let bin = edges.windows(2).position(|e| *t >= e[0] && *t < e[1]).unwrap_or(15);
            counts[bin] += 1;
        }
        let expected = n_draws as f64 / 16.0;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(stat < 30.5779, "chi-square statistic {stat} exceeds the p=0.01 critical value");
    }

    #[test]
    fn resample_merges_and_sorts() {
        let mut coarse = coarse_with_weights(vec![1.0; 8]);
        coarse.weights[3] = 5.0;
        let merged = resample_fine(&coarse, (0.0, 1.0), 8, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(merged.len(), 16);
        assert!(merged.windows(2).all(|p| p[0] <= p[1]));
        assert!(merged.iter().all(|t| (0.0..=1.0).contains(t)));
    }

    #[test]
    fn origin_selection_centers_on_peak() {
        let mut w = vec![0.1; 64];
        w[10] = 2.0;
        assert_eq!(select_scatter_origins(&w, 5).unwrap(), 8..13);
    }

    #[test]
    fn origin_selection_clamps_at_boundary() {
        let mut w = vec![0.1; 32];
        w[0] = 9.0;
        assert_eq!(select_scatter_origins(&w, 5).unwrap(), 0..5);
        let mut w2 = vec![0.1; 32];
        w2[31] = 9.0;
        assert_eq!(select_scatter_origins(&w2, 5).unwrap(), 27..32);
    }

    #[test]
    fn origin_selection_tie_breaks_low() {
        let mut w = vec![0.1; 64];
        w[10] = 2.0;
        w[20] = 2.0;
        assert_eq!(select_scatter_origins(&w, 5).unwrap(), 8..13);
    }

    #[test]
    fn origin_selection_needs_enough_samples() {
        assert!(matches!(
            select_scatter_origins(&[1.0, 2.0], 5),
            Err(Error::TooFewSamples { need: 5, got: 2 })
        ));
    }

    /// Fine samples concentrate on a single analytic density peak: weights
    /// computed against the exact field put >= 60% of the importance draws
    /// inside the peak's support after one coarse pass.
    #[test]
    fn fine_samples_concentrate_on_density_peak() {
        use crate::field::AnalyticField;
        use crate::renderer::weigh_samples;

        let slab = AnalyticField::ConstantBox {
            min: Vec3::new(-10.0, -10.0, 0.42),
            max: Vec3::new(10.0, 10.0, 0.58),
            sigma: 14.0,
            color: Vec3::splat(0.5),
        };
        let ray = unit_ray();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ts = stratified_samples(&ray, 32, &mut rng);
        let mut coarse = RaySampleSet { t_values: ts, ..Default::default() };
        for &t in &coarse.t_values {
            let out = slab.eval(ray.point_at(t));
            coarse.sigmas.push(out.sigma);
            coarse.colors.push(out.color);
        }
        weigh_samples(&mut coarse, ray.t_far);
        let draws = fine_t_draws(&coarse.t_values, &coarse.weights, (0.0, 1.0), 512, &mut rng);
        let inside = draws.iter().filter(|t| **t >= 0.42 && **t <= 0.58).count();
        let fraction = inside as f64 / draws.len() as f64;
        assert!(fraction >= 0.6, "only {fraction:.2} of fine samples hit the peak support");
    }

    #[test]
    fn origin_windows_are_always_k_long() {
        for peak in 0..16 {
            let mut w = vec![0.0; 16];
            w[peak] = 1.0;
            let r = select_scatter_origins(&w, 5).unwrap();
            assert_eq!(r.len(), 5);
            assert!(r.end <= 16);
        }
    }
}
