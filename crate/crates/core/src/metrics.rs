//! Image quality metrics: PSNR and SSIM, each in the linear (`-l`) and
//! tonemapped (`-mu`) domains.
//!
//! PSNR of identical images is reported as `f64::INFINITY`; report writers
//! keep such scenes out of averages and list them separately.

use crate::error::{Error, Result};
use crate::hdr::{tonemap, PhotometricConfig};
use crate::tensor::Tensor;

/// SSIM window side (11 x 11 Gaussian).
pub const SSIM_WINDOW: usize = 11;
/// Gaussian sigma for the SSIM window.
pub const SSIM_SIGMA: f64 = 1.5;
/// Stabilizing constants for dynamic range 1: C1 = (0.01)^2, C2 = (0.03)^2.
pub const SSIM_C1: f64 = 0.0001;
pub const SSIM_C2: f64 = 0.0009;

fn check_pair(a: &Tensor, b: &Tensor, context: &'static str) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::shape(
            context,
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in decibels for images in [0, 1]:
/// `10 * log10(1 / MSE)`. Identical images give `f64::INFINITY`.
pub fn psnr(a: &Tensor, b: &Tensor) -> Result<f64> {
    check_pair(a, b, "psnr")?;
    let n = a.len() as f64;
    let mut se = 0.0;
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        let d = x - y;
        se += d * d;
    }
    if se == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (n / se).log10())
}

/// PSNR on linear values, both images clamped to [0, 1] first.
pub fn psnr_linear(a: &Tensor, b: &Tensor) -> Result<f64> {
    psnr(&a.clamp01(), &b.clamp01())
}

/// PSNR after mu-law tonemapping both images.
pub fn psnr_mu(a: &Tensor, b: &Tensor, cfg: &PhotometricConfig) -> Result<f64> {
    psnr(&tonemap(a, cfg), &tonemap(b, cfg))
}

fn gaussian_kernel_1d() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable valid-mode Gaussian filter of one channel plane.
/// Input `h x w`, output `(h - 10) x (w - 10)`.
fn gauss_filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let oh = h - (SSIM_WINDOW - 1);
    let ow = w - (SSIM_WINDOW - 1);
    // Horizontal pass: h rows x ow cols.
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * plane[y * w + x + i];
            }
            tmp[y * ow + x] = acc;
        }
    }
    // Vertical pass: oh rows x ow cols.
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * tmp[(y + i) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Mean structural similarity over all valid 11x11 Gaussian windows,
/// averaged across channels. Errors if the image is smaller than the window.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    check_pair(a, b, "ssim")?;
    let (h, w, c) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    let k = gaussian_kernel_1d();
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..c {
        // Extract channel planes and their products.
        let n = h * w;
        let mut pa = vec![0.0; n];
        let mut pb = vec![0.0; n];
        let mut paa = vec![0.0; n];
        let mut pbb = vec![0.0; n];
        let mut pab = vec![0.0; n];
        for y in 0..h {
            for x in 0..w {
                let va = a.at(y, x, ch);
                let vb = b.at(y, x, ch);
                let i = y * w + x;
                pa[i] = va;
                pb[i] = vb;
                paa[i] = va * va;
                pbb[i] = vb * vb;
                pab[i] = va * vb;
            }
        }
        let mu_a = gauss_filter_valid(&pa, h, w, &k);
        let mu_b = gauss_filter_valid(&pb, h, w, &k);
        let m_aa = gauss_filter_valid(&paa, h, w, &k);
        let m_bb = gauss_filter_valid(&pbb, h, w, &k);
        let m_ab = gauss_filter_valid(&pab, h, w, &k);
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = m_aa[i] - ma * ma;
            let var_b = m_bb[i] - mb * mb;
            let cov = m_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM on linear values, both images clamped to [0, 1] first.
pub fn ssim_linear(a: &Tensor, b: &Tensor) -> Result<f64> {
    ssim(&a.clamp01(), &b.clamp01())
}

/// SSIM after mu-law tonemapping both images.
pub fn ssim_mu(a: &Tensor, b: &Tensor, cfg: &PhotometricConfig) -> Result<f64> {
    ssim(&tonemap(a, cfg), &tonemap(b, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noisy(base: &Tensor, amp: f64, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        base.map(|v| (v + amp * (rng.gen::<f64>() * 2.0 - 1.0)).clamp(0.0, 1.0))
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = Tensor::filled(4, 4, 3, 0.3);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_constant_offset_is_twenty_db() {
        let a = Tensor::filled(8, 8, 3, 0.0);
        let b = Tensor::filled(8, 8, 3, 0.1);
        let got = psnr(&a, &b).unwrap();
        assert!((got - 20.0).abs() < 1e-9, "got {got}");
    }

    #[test]
    fn psnr_is_symmetric() {
        let a = Tensor::from_fn(6, 6, 3, |y, x, c| ((y * 7 + x * 3 + c) % 10) as f64 / 10.0);
        let b = noisy(&a, 0.05, 7);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let base = Tensor::filled(16, 16, 3, 0.5);
        let mut last = f64::INFINITY;
        for (i, amp) in [0.01, 0.03, 0.1, 0.3].iter().enumerate() {
            let v = psnr(&base, &noisy(&base, *amp, 11 + i as u64)).unwrap();
            assert!(v < last, "psnr not monotone over noise sweep: {v} >= {last}");
            last = v;
        }
    }

    #[test]
    fn psnr_shape_mismatch_errors() {
        let a = Tensor::zeros(4, 4, 3);
        let b = Tensor::zeros(4, 5, 3);
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn ssim_self_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Tensor::from_fn(16, 13, 3, |_, _, _| rng.gen());
        let got = ssim(&a, &a).unwrap();
        assert!((got - 1.0).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn ssim_constant_images_match_luminance_closed_form() {
        let a = Tensor::filled(12, 12, 3, 0.25);
        let b = Tensor::filled(12, 12, 3, 0.75);
        // Variances and covariance vanish, leaving
        // (2 mu_a mu_b + C1) / (mu_a^2 + mu_b^2 + C1).
        let (ma, mb) = (0.25f64, 0.75f64);
        let expect = (2.0 * ma * mb + SSIM_C1) / (ma * ma + mb * mb + SSIM_C1);
        let got = ssim(&a, &b).unwrap();
        assert!((got - expect).abs() < 1e-12, "got {got}, expect {expect}");
    }

    #[test]
    fn ssim_rejects_images_smaller_than_window() {
        let a = Tensor::zeros(10, 16, 3);
        assert!(ssim(&a, &a).is_err());
        let b = Tensor::zeros(11, 11, 3);
        assert!(ssim(&b, &b).is_ok());
    }

    #[test]
    fn ssim_binary_inversion_matches_direct_formula() {
        // a vs (1 - a) on a binary image, against a windowed brute-force
        // evaluation of the textbook formula.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = Tensor::from_fn(14, 14, 1, |_, _, _| f64::from(rng.gen::<bool>()));
        let b = a.map(|v| 1.0 - v);
        let got = ssim(&a, &b).unwrap();
        let oracle = brute_force_ssim(&a, &b);
        assert!((got - oracle).abs() < 1e-9, "got {got}, oracle {oracle}");
    }

    /// Direct windowed SSIM with explicit loops (no separable reuse).
    fn brute_force_ssim(a: &Tensor, b: &Tensor) -> f64 {
        let (h, w, c) = a.shape();
        let k1 = gaussian_kernel_1d();
        let mut k2 = [[0.0; SSIM_WINDOW]; SSIM_WINDOW];
        for (i, row) in k2.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = k1[i] * k1[j];
            }
        }
        let mut total = 0.0;
        let mut count = 0;
        for ch in 0..c {
            for y0 in 0..=(h - SSIM_WINDOW) {
                for x0 in 0..=(w - SSIM_WINDOW) {
                    let (mut ma, mut mb) = (0.0, 0.0);
                    for i in 0..SSIM_WINDOW {
                        for j in 0..SSIM_WINDOW {
                            ma += k2[i][j] * a.at(y0 + i, x0 + j, ch);
                            mb += k2[i][j] * b.at(y0 + i, x0 + j, ch);
                        }
                    }
                    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                    for i in 0..SSIM_WINDOW {
                        for j in 0..SSIM_WINDOW {
                            let da = a.at(y0 + i, x0 + j, ch) - ma;
                            let db = b.at(y0 + i, x0 + j, ch) - mb;
                            va += k2[i][j] * da * da;
                            vb += k2[i][j] * db * db;
                            cov += k2[i][j] * da * db;
                        }
                    }
                    let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
                    let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
                    total += num / den;
                    count += 1;
                }
            }
        }
        total / count as f64
    }

    #[test]
    fn ssim_separable_matches_brute_force_on_random_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Tensor::from_fn(15, 18, 3, |_, _, _| rng.gen());
        let b = noisy(&a, 0.2, 6);
        let got = ssim(&a, &b).unwrap();
        let oracle = brute_force_ssim(&a, &b);
        assert!((got - oracle).abs() < 1e-9, "got {got}, oracle {oracle}");
    }
}
