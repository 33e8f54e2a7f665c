use image::imageops::{resize, FilterType};
use image::RgbImage;

use super::MetricsError;

pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const L: f64 = 255.0;
const C1: f64 = (0.01 * L) * (0.01 * L);
const C2: f64 = (0.03 * L) * (0.03 * L);

fn same_dims(a: &RgbImage, b: &RgbImage) -> Result<(), MetricsError> {
    if a.dimensions() != b.dimensions() {
        let ((aw, ah), (bw, bh)) = (a.dimensions(), b.dimensions());
        return Err(MetricsError::DimensionMismatch(aw, ah, bw, bh));
    }
    Ok(())
}

/// Peak signal-to-noise ratio over all three channels, capped at 100 dB.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64, MetricsError> {
    same_dims(a, b)?;
    let n = a.as_raw().len();
    if n == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let sse: f64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    let mse = sse / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (L * L / mse).log10()).min(PSNR_CAP_DB))
}

/// BT.601 luma, row-major.
pub fn luma(img: &RgbImage) -> Vec<f64> {
    img.pixels()
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.map(|v| v / sum)
}

/// Separable valid-mode filtering with the SSIM window.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(i, kv)| kv * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity on luma with an 11×11 Gaussian window
/// (sigma 1.5), averaged over all fully contained window positions.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64, MetricsError> {
    same_dims(a, b)?;
    let (w, h) = a.dimensions();
    if (w as usize) < SSIM_WINDOW || (h as usize) < SSIM_WINDOW {
        return Err(MetricsError::TooSmall(w, h));
    }
    let (w, h) = (w as usize, h as usize);
    let k = gaussian_kernel();
    let x = luma(a);
    let y = luma(b);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mx = filter_valid(&x, w, h, &k);
    let my = filter_valid(&y, w, h, &k);
    let sxx = filter_valid(&xx, w, h, &k);
    let syy = filter_valid(&yy, w, h, &k);
    let sxy = filter_valid(&xy, w, h, &k);
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + C1) * (2.0 * cov + C2)) / ((ux * ux + uy * uy + C1) * (vx + vy + C2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Bilinear resampling to `width`×`height`; a no-op copy at equal size.
pub fn upscale_bilinear(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    if img.dimensions() == (width, height) {
        return img.clone();
    }
    resize(img, width, height, FilterType::Triangle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use proptest::prelude::*;

    fn pattern(w: u32, h: u32, seed: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            let v = (x.wrapping_mul(37) ^ y.wrapping_mul(91) ^ seed).wrapping_mul(2654435761) >> 24;
            Rgb([v as u8, (v as u8).wrapping_add(x as u8), (y * 9) as u8])
        })
    }

    #[test]
    fn psnr_extremes() {
        let black = RgbImage::from_pixel(8, 8, Rgb([0, 0, 0]));
        let white = RgbImage::from_pixel(8, 8, Rgb([255, 255, 255]));
        assert_eq!(psnr(&black, &black).unwrap(), 100.0);
        assert_eq!(psnr(&black, &white).unwrap(), 0.0);
    }

    #[test]
    fn psnr_hand_computed() {
        // Differences 0,1,2,3 repeated over a 4x4 image: MSE = 3.5.
        let a = RgbImage::from_pixel(4, 4, Rgb([100, 100, 100]));
        let b = RgbImage::from_fn(4, 4, |x, _| {
            let v = 100 + x as u8;
            Rgb([v, v, v])
        });
        let expected = 10.0 * (255.0f64 * 255.0 / 3.5).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn dimension_checks() {
        let a = RgbImage::new(16, 16);
        let b = RgbImage::new(16, 15);
        assert!(matches!(psnr(&a, &b), Err(MetricsError::DimensionMismatch(..))));
        assert!(matches!(ssim(&a, &b), Err(MetricsError::DimensionMismatch(..))));
        let tiny = RgbImage::new(10, 40);
        assert!(matches!(ssim(&tiny, &tiny), Err(MetricsError::TooSmall(10, 40))));
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let a = pattern(48, 40, 1);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let mut inv = a.clone();
        inv.pixels_mut().for_each(|p| p.0 = p.0.map(|v| 255 - v));
        assert!(ssim(&a, &inv).unwrap() < 0.2);
    }

    #[test]
    fn ssim_flat_images() {
        let a = RgbImage::from_pixel(20, 20, Rgb([10, 10, 10]));
        let b = RgbImage::from_pixel(20, 20, Rgb([200, 200, 200]));
        let s = ssim(&a, &b).unwrap();
        assert!(s > -1.0 && s < 0.2);
    }

    #[test]
    fn upscale_same_size_is_identity() {
        let a = pattern(30, 20, 2);
        assert_eq!(upscale_bilinear(&a, 30, 20), a);
        assert_eq!(upscale_bilinear(&a, 60, 40).dimensions(), (60, 40));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ssim_symmetric_and_bounded(s1 in 0u32..1000, s2 in 0u32..1000) {
            let a = pattern(24, 19, s1);
            let b = pattern(24, 19, s2);
            let ab = ssim(&a, &b).unwrap();
            let ba = ssim(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
            let p = psnr(&a, &b).unwrap();
            prop_assert_eq!(p == PSNR_CAP_DB, a == b);
        }
    }
}
