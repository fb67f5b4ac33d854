//! Image quality metrics: PSNR over all channels and mean local SSIM with a
//! 7x7 uniform window on the luma channel.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

const SSIM_WINDOW: usize = 7;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
/// Dynamic range of linear-RGB images in [0,1].
const SSIM_L: f64 = 1.0;

/// `10 log10(1 / MSE)` with the MSE over all channels; identical images give
/// positive infinity.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.same_dims(b)?;
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// PSNR restricted to pixels where `mask` is true.
pub fn psnr_masked(a: &ImageBuffer, b: &ImageBuffer, mask: &[bool]) -> Result<f64> {
    a.same_dims(b)?;
    if mask.len() != a.width * a.height {
        return Err(Error::LengthMismatch(mask.len(), a.width * a.height));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        for c in 0..3 {
            let d = a.data[3 * i + c] - b.data[3 * i + c];
            sum += d * d;
        }
        count += 3;
    }
    if count == 0 {
        return Err(Error::InvalidConfig("empty mask".into()));
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

fn to_gray(img: &ImageBuffer) -> Vec<f64> {
    img.data
        .chunks_exact(3)
        .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
        .collect()
}

/// Mean local SSIM over all full 7x7 windows of the grayscale conversion
/// `0.299 R + 0.587 G + 0.114 B`.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.same_dims(b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::ImageTooSmall(a.width, a.height));
    }
    let ga = to_gray(a);
    let gb = to_gray(b);
    let (w, h) = (a.width, a.height);
    let c1 = (SSIM_K1 * SSIM_L) * (SSIM_K1 * SSIM_L);
    let c2 = (SSIM_K2 * SSIM_L) * (SSIM_K2 * SSIM_L);
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;

    let mut total = 0.0;
    let mut windows = 0usize;
    for wy in 0..=(h - SSIM_WINDOW) {
        for wx in 0..=(w - SSIM_WINDOW) {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                let row = (wy + dy) * w + wx;
                for dx in 0..SSIM_WINDOW {
                    let x = ga[row + dx];
                    let y = gb[row + dx];
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let mu_a = sa / n;
            let mu_b = sb / n;
            let var_a = saa / n - mu_a * mu_a;
            let var_b = sbb / n - mu_b * mu_b;
            let cov = sab / n - mu_a * mu_b;
            let value = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            total += value;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    #[test]
    fn psnr_of_identical_images_is_infinite() {
        let img = ImageBuffer::filled(8, 8, Vec3::new(0.2, 0.4, 0.6));
        assert_eq!(psnr(&img, &img).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_uniform_offset_half() {
        // MSE 0.25 -> 10 log10(4) ~ 6.0206 dB
        let a = ImageBuffer::filled(4, 4, Vec3::ZERO);
        let b = ImageBuffer::filled(4, 4, Vec3::splat(0.5));
        let v = psnr(&a, &b).unwrap();
        assert!((v - 10.0 * 4.0f64.log10()).abs() < 1e-12);
        assert!((v - 6.0206).abs() < 1e-3);
    }

    #[test]
    fn psnr_full_scale_error_is_zero_db() {
        let a = ImageBuffer::filled(4, 4, Vec3::ZERO);
        let b = ImageBuffer::filled(4, 4, Vec3::splat(1.0));
        assert!((psnr(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn psnr_matches_scalar_loop_oracle() {
        let mut a = ImageBuffer::new(5, 4);
        let mut b = ImageBuffer::new(5, 4);
        for (i, v) in a.data.iter_mut().enumerate() {
            *v = ((i * 29) % 97) as f64 / 96.0;
        }
        for (i, v) in b.data.iter_mut().enumerate() {
            *v = ((i * 53 + 7) % 89) as f64 / 88.0;
        }
        let mut acc = 0.0;
        let mut count = 0;
        for i in 0..a.data.len() {
            let d = a.data[i] - b.data[i];
            acc += d * d;
            count += 1;
        }
        let oracle = 10.0 * (count as f64 / acc).log10();
        assert!((psnr(&a, &b).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn psnr_dimension_mismatch() {
        let a = ImageBuffer::new(4, 4);
        let b = ImageBuffer::new(5, 4);
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn masked_psnr_ignores_unmasked_pixels() {
        let mut a = ImageBuffer::filled(2, 2, Vec3::ZERO);
        let b = ImageBuffer::filled(2, 2, Vec3::ZERO);
        a.set_pixel(0, 0, Vec3::splat(1.0)); // error outside the mask
        let mask = vec![false, true, true, true];
        assert_eq!(psnr_masked(&a, &b, &mask).unwrap(), f64::INFINITY);
        let full = vec![true; 4];
        assert!(psnr_masked(&a, &b, &full).unwrap() < 20.0);
    }

    #[test]
    fn ssim_identical_images_is_one() {
        let mut img = ImageBuffer::new(12, 9);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = ((i * 13) % 31) as f64 / 30.0;
        }
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_negative_against_inverted_image() {
        // strong local variance so the structure term dominates
        let mut a = ImageBuffer::new(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                let v = if (x + y) % 2 == 0 { 0.1 } else { 0.9 };
                a.set_pixel(x, y, Vec3::splat(v));
            }
        }
        let mut b = a.clone();
        for v in b.data.iter_mut() {
            *v = 1.0 - *v;
        }
        assert!(ssim(&a, &b).unwrap() < 0.0);
    }

    #[test]
    fn ssim_of_constants_reduces_to_luminance_term() {
        let a = ImageBuffer::filled(9, 9, Vec3::splat(0.3));
        let b = ImageBuffer::filled(9, 9, Vec3::splat(0.6));
        let c1 = 1e-4;
        // variance and covariance are zero: ((2 mu_a mu_b + C1) C2) / ((mu^2 sum + C1) C2)
        let expect = (2.0 * 0.3 * 0.6 + c1) / (0.3f64 * 0.3 + 0.6 * 0.6 + c1);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = ImageBuffer::new(6, 9);
        assert!(matches!(ssim(&a, &a), Err(Error::ImageTooSmall(6, 9))));
    }
}
