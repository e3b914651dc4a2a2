//! Global features: brightness entropies under luminance rescaling,
//! the colorfulness pair, MSCN naturalness statistics with a
//! generalized-Gaussian fit, and the dark-channel mean.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::image::{
    convolve_2d, entropy, histogram, opponent_channels, saturation_plane, PlaneF, RasterImage,
};

/// Multipliers for the brightness-entropy sweep, in output order.
#[derive(Debug, Clone)]
pub struct BrightnessConfig {
    pub multipliers: [f64; 6],
    pub t_lower: f64,
    pub t_upper: f64,
}

impl Default for BrightnessConfig {
    fn default() -> Self {
        Self {
            multipliers: [3.5, 5.5, 7.5, 1.0 / 3.5, 1.0 / 5.5, 1.0 / 7.5],
            t_lower: 0.0,
            t_upper: 255.0,
        }
    }
}

/// Entropies of the luminance plane rescaled by each multiplier and
/// clamped to [t_lower, t_upper].
pub fn brightness_entropies(gray: &PlaneF, cfg: &BrightnessConfig) -> Result<[f64; 6]> {
    if cfg.t_lower >= cfg.t_upper || cfg.multipliers.iter().any(|&m| m <= 0.0) {
        return Err(Error::InvalidParameter("bad brightness config".into()));
    }
    let mut out = [0.0f64; 6];
    for (i, &m) in cfg.multipliers.iter().enumerate() {
        let scaled = PlaneF::new(
            gray.width(),
            gray.height(),
            gray.data()
                .iter()
                .map(|&v| (m * v).clamp(cfg.t_lower, cfg.t_upper))
                .collect(),
        )?;
        out[i] = entropy(&histogram(&scaled, true)?)?;
    }
    Ok(out)
}

/// Mean saturation S and the opponent-moment colorfulness
/// C = sqrt(var_yb + var_rg) + 0.3 sqrt(mean_yb^2 + mean_rg^2).
pub fn colorfulness_pair(img: &RasterImage) -> Result<(f64, f64)> {
    let sat = saturation_plane(img)?;
    let s = sat.mean();
    let (yb, rg) = opponent_channels(img)?;
    let moments = |p: &PlaneF| -> (f64, f64) {
        let n = p.data().len() as f64;
        let mean = p.data().iter().sum::<f64>() / n;
        let var = p.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    };
    let (mu_yb, var_yb) = moments(&yb);
    let (mu_rg, var_rg) = moments(&rg);
    let c = (var_yb + var_rg).sqrt() + 0.3 * (mu_yb * mu_yb + mu_rg * mu_rg).sqrt();
    Ok((s, c))
}

/// MSCN window parameters.
#[derive(Debug, Clone)]
pub struct MscnConfig {
    /// Window edge length (odd).
    pub window: usize,
    /// Gaussian sigma of the window.
    pub sigma: f64,
    /// Divisive-normalization stabilizer on the 0-255 scale.
    pub epsilon: f64,
}

impl Default for MscnConfig {
    fn default() -> Self {
        Self {
            window: 7,
            sigma: 7.0 / 6.0,
            epsilon: 1.0,
        }
    }
}

/// Gaussian window of the config, normalized to unit sum.
pub fn mscn_window(cfg: &MscnConfig) -> Result<PlaneF> {
    if cfg.window % 2 == 0 || cfg.window == 0 || cfg.sigma <= 0.0 {
        return Err(Error::InvalidParameter("bad MSCN window".into()));
    }
    Ok(crate::image::gaussian_kernel(cfg.sigma, cfg.window / 2))
}

/// Mean-subtracted contrast-normalized coefficients:
/// (s - mu) / (sigma + epsilon) with Gaussian-weighted local moments.
pub fn mscn(gray: &PlaneF, cfg: &MscnConfig) -> Result<PlaneF> {
    let w = mscn_window(cfg)?;
    let mu = convolve_2d(gray, &w)?;
    let sq = PlaneF::new(
        gray.width(),
        gray.height(),
        gray.data().iter().map(|v| v * v).collect(),
    )?;
    let musq = convolve_2d(&sq, &w)?;
    let mut out = Vec::with_capacity(gray.data().len());
    for i in 0..gray.data().len() {
        let m = mu.data()[i];
        let var = (musq.data()[i] - m * m).max(0.0);
        out.push((gray.data()[i] - m) / (var.sqrt() + cfg.epsilon));
    }
    PlaneF::new(gray.width(), gray.height(), out)
}

/// Zero-mean generalized-Gaussian fit.
#[derive(Debug, Clone, Copy)]
pub struct GgdFit {
    /// Shape parameter.
    pub nu: f64,
    /// Sample second moment.
    pub sigma2: f64,
    /// True when the shape hit the [0.2, 10] search bounds.
    pub clamped: bool,
}

pub const GGD_NU_MIN: f64 = 0.2;
pub const GGD_NU_MAX: f64 = 10.0;

/// Generalized-Gaussian moment ratio Gamma(1/v) Gamma(3/v) / Gamma(2/v)^2,
/// strictly decreasing in v.
pub fn ggd_moment_ratio(nu: f64) -> f64 {
    (ln_gamma(1.0 / nu) + ln_gamma(3.0 / nu) - 2.0 * ln_gamma(2.0 / nu)).exp()
}

/// Fits nu and sigma^2 by matching E|x|^2 / (E|x|)^2 against the GGD
/// moment ratio, inverted by bisection over [0.2, 10].
pub fn ggd_fit(samples: &[f64]) -> Result<GgdFit> {
    if samples.len() < 1000 {
        return Err(Error::DegenerateSamples(format!(
            "need >= 1000 samples, got {}",
            samples.len()
        )));
    }
    let first = samples[0];
    if samples.iter().all(|&v| v == first) {
        return Err(Error::DegenerateSamples("all samples equal".into()));
    }
    let n = samples.len() as f64;
    let m1 = samples.iter().map(|v| v.abs()).sum::<f64>() / n;
    let m2 = samples.iter().map(|v| v * v).sum::<f64>() / n;
    let rho = m2 / (m1 * m1);

    let (mut lo, mut hi) = (GGD_NU_MIN, GGD_NU_MAX);
    let (r_lo, r_hi) = (ggd_moment_ratio(lo), ggd_moment_ratio(hi));
    // ratio decreases with nu: out-of-range targets clamp to the bounds
    if rho >= r_lo {
        return Ok(GgdFit {
            nu: GGD_NU_MIN,
            sigma2: m2,
            clamped: true,
        });
    }
    if rho <= r_hi {
        return Ok(GgdFit {
            nu: GGD_NU_MAX,
            sigma2: m2,
            clamped: true,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ggd_moment_ratio(mid) > rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(GgdFit {
        nu: 0.5 * (lo + hi),
        sigma2: m2,
        clamped: false,
    })
}

/// Mean of the per-pixel RGB minimum, normalized to [0, 1].
pub fn dark_channel_mean(img: &RasterImage) -> Result<f64> {
    if img.channels() != 3 {
        return Err(Error::NeedsColor);
    }
    let sum: f64 = img
        .data()
        .chunks_exact(3)
        .map(|px| px[0].min(px[1]).min(px[2]) as f64)
        .sum();
    Ok(sum / (img.pixel_count() as f64 * 255.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::RasterImage;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_plane_brightness_entropies_are_zero() {
        let p = PlaneF::new(16, 16, vec![128.0; 256]).unwrap();
        let e = brightness_entropies(&p, &BrightnessConfig::default()).unwrap();
        assert_eq!(e, [0.0; 6]);
    }

    #[test]
    fn compressed_histogram_entropy_matches_rebinning_oracle() {
        // uniform plane over all 256 levels, multiplier 1/3.5
        let data: Vec<f64> = (0..256).map(|v| v as f64).collect();
        let p = PlaneF::new(16, 16, data).unwrap();
        let e = brightness_entropies(&p, &BrightnessConfig::default()).unwrap();

        // oracle: directly rebin round(v / 3.5) counts and take entropy
        let mut counts = [0usize; 256];
        for v in 0..256 {
            counts[((v as f64) / 3.5).round() as usize] += 1;
        }
        let mut expect = 0.0;
        for &c in counts.iter().filter(|&&c| c > 0) {
            let pr = c as f64 / 256.0;
            expect -= pr * pr.log2();
        }
        assert_abs_diff_eq!(e[3], expect, epsilon = 1e-12);
        // all entropies bounded by 8 bits
        assert!(e.iter().all(|&v| (0.0..=8.0).contains(&v)));
    }

    #[test]
    fn colorfulness_trivial_cases() {
        let gray = RasterImage::new(8, 8, 3, vec![90; 8 * 8 * 3]).unwrap();
        let (s, c) = colorfulness_pair(&gray).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(c, 0.0);

        let mut red = Vec::new();
        for _ in 0..64 {
            red.extend([255u8, 0, 0]);
        }
        let red = RasterImage::new(8, 8, 3, red).unwrap();
        let (s, c) = colorfulness_pair(&red).unwrap();
        assert_eq!(s, 1.0);
        let expect = 0.3 * (127.5f64 * 127.5 + 255.0 * 255.0).sqrt();
        assert_abs_diff_eq!(c, expect, epsilon = 1e-9);
    }

    #[test]
    fn colorfulness_two_mass_oracle() {
        // left half red (255,0,0): yb = 127.5, rg = 255
        // right half blue (0,0,255): yb = -255, rg = 0
        let mut data = Vec::new();
        for _ in 0..32 {
            for x in 0..16 {
                if x < 8 {
                    data.extend([255u8, 0, 0]);
                } else {
                    data.extend([0u8, 0, 255]);
                }
            }
        }
        let img = RasterImage::new(16, 32, 3, data).unwrap();
        let (_, c) = colorfulness_pair(&img).unwrap();

        let mu_yb: f64 = 0.5 * (127.5 - 255.0);
        let var_yb = 0.5 * ((127.5 - mu_yb).powi(2) + (-255.0 - mu_yb).powi(2));
        let mu_rg: f64 = 0.5 * 255.0;
        let var_rg = 0.5 * ((255.0 - mu_rg).powi(2) + (0.0 - mu_rg).powi(2));
        let expect = (var_yb + var_rg).sqrt() + 0.3 * (mu_yb * mu_yb + mu_rg * mu_rg).sqrt();
        assert_abs_diff_eq!(c, expect, epsilon = 1e-9);
    }

    #[test]
    fn mscn_constant_plane_is_zero() {
        let p = PlaneF::new(16, 16, vec![200.0; 256]).unwrap();
        let m = mscn(&p, &MscnConfig::default()).unwrap();
        assert!(m.data().iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn mscn_mean_is_near_zero_on_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PlaneF::new(
            128,
            128,
            (0..128 * 128).map(|_| rng.gen_range(0.0..255.0)).collect(),
        )
        .unwrap();
        let m = mscn(&p, &MscnConfig::default()).unwrap();
        assert!(m.mean().abs() < 0.01);
    }

    #[test]
    fn mscn_impulse_center_matches_window_oracle() {
        let cfg = MscnConfig::default();
        let w = mscn_window(&cfg).unwrap();
        let wc = w.get(3, 3);
        let (n, c) = (33usize, 16usize);
        let mut data = vec![0.0f64; n * n];
        data[c * n + c] = 1.0;
        let p = PlaneF::new(n, n, data).unwrap();
        let m = mscn(&p, &cfg).unwrap();
        // local mean = wc, local E[s^2] = wc (0/1 signal), so
        // sigma = sqrt(wc - wc^2)
        let sigma = (wc - wc * wc).sqrt();
        let expect = (1.0 - wc) / (sigma + cfg.epsilon);
        assert_abs_diff_eq!(m.get(c, c), expect, epsilon = 1e-12);
    }

    fn gaussian_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect()
    }

    #[test]
    fn ggd_fit_recovers_gaussian_and_laplacian() {
        let fit = ggd_fit(&gaussian_samples(100_000, 42)).unwrap();
        assert!((fit.nu - 2.0).abs() <= 0.1, "nu = {}", fit.nu);
        assert!((fit.sigma2 - 1.0).abs() <= 0.05, "sigma2 = {}", fit.sigma2);
        assert!(!fit.clamped);

        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let laplace: Vec<f64> = (0..100_000)
            .map(|_| {
                let u: f64 = rng.gen_range(-0.5..0.5);
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect();
        let fit = ggd_fit(&laplace).unwrap();
        assert!((fit.nu - 1.0).abs() <= 0.1, "nu = {}", fit.nu);
    }

    #[test]
    fn ggd_ratio_round_trip() {
        let rho = ggd_moment_ratio(0.75);
        // invert by the same bisection the fit uses
        let (mut lo, mut hi) = (GGD_NU_MIN, GGD_NU_MAX);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ggd_moment_ratio(mid) > rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((0.5 * (lo + hi) - 0.75).abs() <= 1e-3);
    }

    #[test]
    fn ggd_fit_rejects_constant_samples() {
        let s = vec![1.5f64; 2000];
        assert!(matches!(
            ggd_fit(&s),
            Err(Error::DegenerateSamples(_))
        ));
    }

    #[test]
    fn dark_channel_values() {
        let white = RasterImage::new(8, 8, 3, vec![255; 192]).unwrap();
        assert_eq!(dark_channel_mean(&white).unwrap(), 1.0);

        let mut red = Vec::new();
        for _ in 0..64 {
            red.extend([255u8, 0, 0]);
        }
        let red = RasterImage::new(8, 8, 3, red).unwrap();
        assert_eq!(dark_channel_mean(&red).unwrap(), 0.0);

        let gray = RasterImage::new(8, 8, 3, vec![93; 192]).unwrap();
        assert_abs_diff_eq!(dark_channel_mean(&gray).unwrap(), 93.0 / 255.0, epsilon = 1e-12);
    }

    #[test]
    fn dark_channel_monotone_under_brightening() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<u8> = (0..12 * 12 * 3).map(|_| rng.gen_range(0..180)).collect();
        let brighter: Vec<u8> = data.iter().map(|&v| v + 40).collect();
        let a = RasterImage::new(12, 12, 3, data).unwrap();
        let b = RasterImage::new(12, 12, 3, brighter).unwrap();
        assert!(dark_channel_mean(&b).unwrap() > dark_channel_mean(&a).unwrap());
    }
}
