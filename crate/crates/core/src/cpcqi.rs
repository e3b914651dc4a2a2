//! Full-reference C-PCQI metric: patch-wise mean-intensity, contrast,
//! and structure similarities multiplied by a color-saturation term,
//! averaged over an 11x11 grid with stride 4.
//!
//! Used as the label oracle when synthesizing training corpora, and
//! exposed standalone through the CLI.

use crate::error::{Error, Result};
use crate::image::{saturation_plane, to_gray, PlaneF, RasterImage};

/// Patch decomposition and similarity constants.
#[derive(Debug, Clone)]
pub struct CpcqiParams {
    /// Patch edge length.
    pub patch_size: usize,
    /// Grid stride in pixels.
    pub stride: usize,
    /// Mean-intensity stabilizer.
    pub c1: f64,
    /// Contrast stabilizer.
    pub c2: f64,
    /// Structure stabilizer.
    pub c3: f64,
    /// Saturation-similarity stabilizer.
    pub zeta: f64,
    /// Saturation-similarity pooling exponent.
    pub exponent: f64,
}

impl Default for CpcqiParams {
    fn default() -> Self {
        Self {
            patch_size: 11,
            stride: 4,
            c1: (0.01 * 255.0) * (0.01 * 255.0),
            c2: (0.03 * 255.0) * (0.03 * 255.0),
            c3: (0.03 * 255.0) * (0.03 * 255.0) / 2.0,
            zeta: 1e-3,
            exponent: 1.0,
        }
    }
}

impl CpcqiParams {
    fn validate(&self) -> Result<()> {
        if self.patch_size < 2 || self.stride == 0 {
            return Err(Error::InvalidParameter("bad patch grid".into()));
        }
        if self.c1 <= 0.0 || self.c2 <= 0.0 || self.c3 <= 0.0 || self.zeta <= 0.0 {
            return Err(Error::InvalidParameter(
                "similarity stabilizers must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Similarity of two saturation values:
/// ((2 st1 st2 + zeta) / (st1^2 + st2^2 + zeta))^exponent.
pub fn saturation_similarity(st1: f64, st2: f64, zeta: f64, exponent: f64) -> f64 {
    ((2.0 * st1 * st2 + zeta) / (st1 * st1 + st2 * st2 + zeta)).powf(exponent)
}

struct PatchStats {
    mean: f64,
    strength: f64,
    /// Mean-removed patch, unit L2 norm; all zeros when strength is 0.
    structure: Vec<f64>,
    saturation: f64,
}

fn patch_stats(gray: &PlaneF, sat: &PlaneF, x0: usize, y0: usize, size: usize) -> PatchStats {
    let n = (size * size) as f64;
    let mut sum = 0.0;
    let mut sat_sum = 0.0;
    for y in y0..y0 + size {
        for x in x0..x0 + size {
            sum += gray.get(x, y);
            sat_sum += sat.get(x, y);
        }
    }
    let mean = sum / n;
    let mut structure = Vec::with_capacity(size * size);
    let mut sq = 0.0;
    for y in y0..y0 + size {
        for x in x0..x0 + size {
            let d = gray.get(x, y) - mean;
            structure.push(d);
            sq += d * d;
        }
    }
    let norm = sq.sqrt();
    if norm > 0.0 {
        for v in &mut structure {
            *v /= norm;
        }
    }
    PatchStats {
        mean,
        strength: (sq / n).sqrt(),
        structure,
        saturation: sat_sum / n,
    }
}

fn ratio_similarity(a: f64, b: f64, c: f64) -> f64 {
    (2.0 * a * b + c) / (a * a + b * b + c)
}

/// Full-reference score of `distorted` against `reference`; 1 at
/// equality, lower as mean intensity, contrast, structure, or
/// saturation deviate.
pub fn cpcqi_score(
    reference: &RasterImage,
    distorted: &RasterImage,
    params: &CpcqiParams,
) -> Result<f64> {
    params.validate()?;
    if reference.width() != distorted.width() || reference.height() != distorted.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            distorted.width(),
            distorted.height()
        )));
    }
    let size = params.patch_size;
    if reference.width() < size || reference.height() < size {
        return Err(Error::TooSmall {
            width: reference.width(),
            height: reference.height(),
            min: size,
        });
    }

    let sat_of = |img: &RasterImage| -> Result<PlaneF> {
        if img.channels() == 3 {
            saturation_plane(img)
        } else {
            Ok(PlaneF::zeros(img.width(), img.height()))
        }
    };
    let g1 = to_gray(reference);
    let g2 = to_gray(distorted);
    let s1 = sat_of(reference)?;
    let s2 = sat_of(distorted)?;

    let mut acc = 0.0;
    let mut count = 0usize;
    let mut y0 = 0;
    while y0 + size <= reference.height() {
        let mut x0 = 0;
        while x0 + size <= reference.width() {
            let p1 = patch_stats(&g1, &s1, x0, y0, size);
            let p2 = patch_stats(&g2, &s2, x0, y0, size);

            let q_mi = ratio_similarity(p1.mean, p2.mean, params.c1);
            let q_cc = ratio_similarity(p1.strength, p2.strength, params.c2);
            let dot = if p1.strength == 0.0 && p2.strength == 0.0 {
                // two flat patches carry identical (absent) structure
                1.0
            } else {
                p1.structure
                    .iter()
                    .zip(&p2.structure)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            };
            let q_sd = ((dot + params.c3) / (1.0 + params.c3)).clamp(0.0, 1.0);
            let q_cs =
                saturation_similarity(p1.saturation, p2.saturation, params.zeta, params.exponent);

            acc += q_mi * q_cc * q_sd * q_cs;
            count += 1;
            x0 += params.stride;
        }
        y0 += params.stride;
    }
    Ok(acc / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(w: usize, h: usize, seed: u64) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                let base = 60.0
                    + 60.0 * ((x as f64) * 0.19).sin()
                    + 50.0 * ((y as f64) * 0.13).cos()
                    + rng.gen_range(-18.0..18.0);
                let r = (base + 25.0).clamp(0.0, 255.0) as u8;
                let g = base.clamp(0.0, 255.0) as u8;
                let b = (base - 20.0).clamp(0.0, 255.0) as u8;
                data.extend([r, g, b]);
            }
        }
        RasterImage::new(w, h, 3, data).unwrap()
    }

    fn apply_lut(img: &RasterImage, lut: impl Fn(u8) -> u8) -> RasterImage {
        RasterImage::new(
            img.width(),
            img.height(),
            3,
            img.data().iter().map(|&v| lut(v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_images_score_exactly_one() {
        let img = textured(64, 48, 1);
        let s = cpcqi_score(&img, &img, &CpcqiParams::default()).unwrap();
        assert_eq!(s, 1.0);

        let flat = RasterImage::new(32, 32, 3, vec![140; 32 * 32 * 3]).unwrap();
        assert_eq!(cpcqi_score(&flat, &flat, &CpcqiParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn collapsing_to_global_mean_scores_below_half() {
        let img = textured(64, 64, 2);
        let mean =
            (img.data().iter().map(|&v| v as f64).sum::<f64>() / img.data().len() as f64) as u8;
        let flat = RasterImage::new(64, 64, 3, vec![mean; 64 * 64 * 3]).unwrap();
        let s = cpcqi_score(&img, &flat, &CpcqiParams::default()).unwrap();
        assert!(s < 0.5, "score {s}");
    }

    #[test]
    fn mild_gamma_beats_heavy_solarize() {
        let img = textured(64, 64, 3);
        let gamma = apply_lut(&img, |v| {
            (255.0 * (v as f64 / 255.0).powf(0.9)).round() as u8
        });
        let solar = apply_lut(&img, |v| if v < 128 { v } else { 255 - v });
        let p = CpcqiParams::default();
        let s_gamma = cpcqi_score(&img, &gamma, &p).unwrap();
        let s_solar = cpcqi_score(&img, &solar, &p).unwrap();
        assert!(
            s_gamma > s_solar,
            "gamma {s_gamma} should beat solarize {s_solar}"
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = textured(32, 32, 4);
        let b = textured(48, 32, 4);
        assert!(matches!(
            cpcqi_score(&a, &b, &CpcqiParams::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn saturation_similarity_examples() {
        assert_eq!(saturation_similarity(0.37, 0.37, 1e-3, 1.0), 1.0);
        let v = saturation_similarity(0.5, 0.0, 1e-3, 1.0);
        assert!((v - 1e-3 / 0.251).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn stride_translation_on_periodic_images() {
        // 8-periodic content, 47x47 so each residue class appears equally
        // often among patch positions; shifting both images by the stride
        // permutes the patch population
        let period_img = |phase: usize| -> RasterImage {
            let mut data = Vec::with_capacity(47 * 47 * 3);
            for y in 0..47 {
                for x in 0..47 {
                    let xx = (x + phase) % 8;
                    let yy = (y + phase) % 8;
                    let v = (40 + 25 * xx + 3 * yy) as u8;
                    data.extend([v, v.saturating_add(30), v / 2]);
                }
            }
            RasterImage::new(47, 47, 3, data).unwrap()
        };
        let distort = |img: &RasterImage| {
            apply_lut(img, |v| (v as f64 * 0.8 + 20.0).round().clamp(0.0, 255.0) as u8)
        };
        let p = CpcqiParams::default();
        let r0 = period_img(0);
        let r4 = period_img(4);
        let s0 = cpcqi_score(&r0, &distort(&r0), &p).unwrap();
        let s4 = cpcqi_score(&r4, &distort(&r4), &p).unwrap();
        assert!((s0 - s4).abs() < 1e-12, "{s0} vs {s4}");
    }

    proptest::proptest! {
        #[test]
        fn saturation_similarity_is_symmetric_and_bounded(
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let f = saturation_similarity(a, b, 1e-3, 1.0);
            let g = saturation_similarity(b, a, 1e-3, 1.0);
            proptest::prop_assert!((f - g).abs() < 1e-15);
            proptest::prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        }
    }
}
