use image::{Rgb, RgbImage};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splatstream::metrics::{psnr, ssim};

fn noise(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(w, h, |_, _| Rgb([rng.gen(), rng.gen(), rng.gen()]))
}

/// `img` with each channel shifted by up to `amp`, saturating.
fn perturb(img: &RgbImage, amp: i16, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    for p in out.pixels_mut() {
        for c in p.0.iter_mut() {
            *c = (i16::from(*c) + rng.gen_range(-amp..=amp)).clamp(0, 255) as u8;
        }
    }
    out
}

/// Mean SSIM over every fully contained 11×11 window, each window's
/// statistics summed directly with 2D Gaussian weights.
fn reference_ssim(a: &RgbImage, b: &RgbImage) -> f64 {
    let luma = |p: &Rgb<u8>| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]);
    let (w, h) = a.dimensions();
    let mut g = [[0.0; 11]; 11];
    let mut sum = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            sum += *v;
        }
    }
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wgt = g[i][j] / sum;
                    let x = luma(a.get_pixel(x0 + j as u32, y0 + i as u32));
                    let y = luma(b.get_pixel(x0 + j as u32, y0 + i as u32));
                    mx += wgt * x;
                    my += wgt * y;
                    sxx += wgt * x * x;
                    syy += wgt * y * y;
                    sxy += wgt * x * y;
                }
            }
            let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / f64::from(count)
}

fn reference_psnr(a: &RgbImage, b: &RgbImage) -> f64 {
    let n = a.as_raw().len() as f64;
    let mse: f64 = a.as_raw().iter().zip(b.as_raw()).map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2)).sum::<f64>() / n;
    10.0 * (255.0 * 255.0 / mse).log10()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ssim_matches_direct_windows(w in 11u32..40, h in 11u32..40, amp in 1i16..120, seed in any::<u64>()) {
        let a = noise(w, h, seed);
        let b = perturb(&a, amp, seed ^ 1);
        let got = ssim(&a, &b).unwrap();
        let want = reference_ssim(&a, &b);
        prop_assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
        prop_assert!((ssim(&b, &a).unwrap() - got).abs() <= 1e-12);
    }

    #[test]
    fn psnr_matches_definition(w in 1u32..40, h in 1u32..40, amp in 1i16..120, seed in any::<u64>()) {
        let a = noise(w, h, seed);
        let b = perturb(&a, amp, seed ^ 2);
        prop_assume!(a != b);
        let got = psnr(&a, &b).unwrap();
        prop_assert!((got - reference_psnr(&a, &b)).abs() <= 1e-9);
    }
}

#[test]
fn more_noise_scores_lower() {
    let a = noise(64, 48, 9);
    let scores: Vec<(f64, f64)> = [2, 8, 32, 96]
        .iter()
        .map(|&amp| {
            let b = perturb(&a, amp, 5);
            (psnr(&a, &b).unwrap(), ssim(&a, &b).unwrap())
        })
        .collect();
    for w in scores.windows(2) {
        assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1, "{scores:?}");
    }
}
