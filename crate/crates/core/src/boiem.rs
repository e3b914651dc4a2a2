//! Two-stage blind-quality-optimized enhancer: gamma-correction with a
//! weighted distribution rectifies brightness, then histogram matching
//! against a blended target rectifies contrast. Both stages operate on
//! the HSV value channel and pick their parameter by maximizing the
//! blind score, three candidates per stage (six evaluations total).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::Extractor;
use crate::image::{histogram, histogram_u8, Histogram256, PlaneF, RasterImage};
use crate::svr::SvrModel;

/// Candidate schedule and skewed-target shape.
#[derive(Debug, Clone)]
pub struct BoiemConfig {
    /// Brightness-stage weighting exponents (exactly three).
    pub lambda_b_candidates: Vec<f64>,
    /// Contrast-stage (lambda_e, lambda_s) pairs (exactly three).
    pub lambda_pairs: Vec<(f64, f64)>,
    /// Rayleigh scale of the positively skewed target histogram.
    pub rayleigh_scale: f64,
}

impl Default for BoiemConfig {
    fn default() -> Self {
        Self {
            lambda_b_candidates: vec![0.3, 0.5, 0.7],
            lambda_pairs: vec![(1.0, 1.0), (4.0, 2.0), (8.0, 4.0)],
            rayleigh_scale: 64.0,
        }
    }
}

impl BoiemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_b_candidates.len() != 3 || self.lambda_pairs.len() != 3 {
            return Err(Error::InvalidParameter(
                "six-evaluation budget needs exactly 3 + 3 candidates".into(),
            ));
        }
        if self
            .lambda_b_candidates
            .iter()
            .any(|&l| l <= 0.0 || l > 1.0)
        {
            return Err(Error::InvalidParameter(
                "lambda_b candidates must lie in (0, 1]".into(),
            ));
        }
        if self
            .lambda_pairs
            .iter()
            .any(|&(e, s)| e < 0.0 || s < 0.0)
        {
            return Err(Error::InvalidParameter(
                "lambda pairs must be nonnegative".into(),
            ));
        }
        if self.rayleigh_scale <= 0.0 {
            return Err(Error::InvalidParameter(
                "rayleigh scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// 256-entry gray-level mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayLut {
    pub entries: [u8; 256],
}

impl GrayLut {
    pub fn identity() -> Self {
        let mut entries = [0u8; 256];
        for (i, e) in entries.iter_mut().enumerate() {
            *e = i as u8;
        }
        Self { entries }
    }

    pub fn is_monotone(&self) -> bool {
        self.entries.windows(2).all(|w| w[1] >= w[0])
    }

    #[inline]
    pub fn map(&self, v: u8) -> u8 {
        self.entries[v as usize]
    }
}

/// Gamma-correction LUT from a weighted gray-level distribution:
/// the PDF over the occupied range is range-normalized, raised to
/// lambda_b, cumulated, and T(z) = 255 (z/255)^(1 - CDF'(z)).
/// Outside the occupied range the CDF clamps to its boundary values.
/// Returns the LUT and a degeneracy flag (single-level histograms map
/// to the identity instead of blasting the level to white).
pub fn agcwd_lut(h: &Histogram256, lambda_b: f64) -> Result<(GrayLut, bool)> {
    if !(0.0..=1.0).contains(&lambda_b) || lambda_b == 0.0 {
        return Err(Error::InvalidParameter(
            "lambda_b must lie in (0, 1]".into(),
        ));
    }
    if !h.is_normalized() {
        return Err(Error::UnnormalizedHistogram { sum: h.sum() });
    }
    let z_min = match h.bins.iter().position(|&b| b > 0.0) {
        Some(i) => i,
        None => return Err(Error::Malformed("empty histogram".into())),
    };
    let z_max = h.bins.iter().rposition(|&b| b > 0.0).unwrap();
    if z_min == z_max {
        return Ok((GrayLut::identity(), true));
    }

    let range = &h.bins[z_min..=z_max];
    let pdf_min = range.iter().cloned().fold(f64::INFINITY, f64::min);
    let pdf_max = range.iter().cloned().fold(0.0f64, f64::max);
    let span = pdf_max - pdf_min;
    let weighted: Vec<f64> = range
        .iter()
        .map(|&p| {
            if span > 0.0 {
                pdf_max * ((p - pdf_min) / span).powf(lambda_b)
            } else {
                pdf_max
            }
        })
        .collect();
    let total: f64 = weighted.iter().sum();
    let mut cdf = Vec::with_capacity(weighted.len());
    let mut acc = 0.0;
    for w in &weighted {
        acc += w;
        cdf.push(acc / total);
    }

    let mut entries = [0u8; 256];
    for (z, e) in entries.iter_mut().enumerate() {
        let c = if z < z_min {
            cdf[0]
        } else if z > z_max {
            1.0
        } else {
            cdf[z - z_min]
        };
        let t = 255.0 * (z as f64 / 255.0).powf(1.0 - c);
        *e = t.round().clamp(0.0, 255.0) as u8;
    }
    Ok((GrayLut { entries }, false))
}

/// Discretized Rayleigh histogram on [0, 255], normalized.
pub fn rayleigh_histogram(scale: f64) -> Histogram256 {
    let s2 = scale * scale;
    let mut bins = [0.0f64; 256];
    for (z, b) in bins.iter_mut().enumerate() {
        let zf = z as f64;
        *b = (zf / s2) * (-(zf * zf) / (2.0 * s2)).exp();
    }
    let sum: f64 = bins.iter().sum();
    for b in &mut bins {
        *b /= sum;
    }
    Histogram256 { bins }
}

/// Convex blend of the uniform, current, and positively skewed
/// histograms: (h_i + le h_e + ls h_s) / (1 + le + ls), renormalized.
pub fn rice_target_histogram(
    h_e: &Histogram256,
    lambda_e: f64,
    lambda_s: f64,
    cfg: &BoiemConfig,
) -> Result<Histogram256> {
    if lambda_e < 0.0 || lambda_s < 0.0 {
        return Err(Error::InvalidParameter(
            "lambda weights must be nonnegative".into(),
        ));
    }
    if !h_e.is_normalized() {
        return Err(Error::UnnormalizedHistogram { sum: h_e.sum() });
    }
    let h_s = rayleigh_histogram(cfg.rayleigh_scale);
    let denom = 1.0 + lambda_e + lambda_s;
    let mut bins = [0.0f64; 256];
    for i in 0..256 {
        bins[i] = (1.0 / 256.0 + lambda_e * h_e.bins[i] + lambda_s * h_s.bins[i]) / denom;
    }
    let sum: f64 = bins.iter().sum();
    for b in &mut bins {
        *b /= sum;
    }
    Ok(Histogram256 { bins })
}

/// Monotone LUT mapping the source distribution onto the target via the
/// right-continuous inverse CDF.
pub fn histogram_match(gray: &PlaneF, target: &Histogram256) -> Result<GrayLut> {
    let source = histogram(gray, true)?;
    Ok(match_histograms(&source, target))
}

/// LUT from source and target distributions directly.
pub fn match_histograms(source: &Histogram256, target: &Histogram256) -> GrayLut {
    let cum = |h: &Histogram256| {
        let mut c = [0.0f64; 256];
        let mut acc = 0.0;
        for i in 0..256 {
            acc += h.bins[i];
            c[i] = acc;
        }
        c
    };
    let cs = cum(source);
    let ct = cum(target);
    let mut entries = [0u8; 256];
    let mut t = 0usize;
    for z in 0..256 {
        while t < 255 && ct[t] < cs[z] - 1e-12 {
            t += 1;
        }
        entries[z] = t as u8;
    }
    GrayLut { entries }
}

/// HSV value channel (max of RGB, or the gray plane itself).
pub fn value_channel(img: &RasterImage) -> Vec<u8> {
    if img.channels() == 1 {
        img.data().to_vec()
    } else {
        img.data()
            .chunks_exact(3)
            .map(|px| px[0].max(px[1]).max(px[2]))
            .collect()
    }
}

/// Applies a gray LUT to the value channel, rescaling RGB so hue and
/// saturation are preserved. Black pixels take the mapped value as gray.
pub fn apply_value_lut(img: &RasterImage, lut: &GrayLut) -> RasterImage {
    if img.channels() == 1 {
        return RasterImage::new(
            img.width(),
            img.height(),
            1,
            img.data().iter().map(|&v| lut.map(v)).collect(),
        )
        .expect("dimensions preserved");
    }
    let mut data = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        let v = px[0].max(px[1]).max(px[2]);
        let v2 = lut.map(v);
        if v == 0 {
            data.extend([v2, v2, v2]);
        } else {
            let ratio = v2 as f64 / v as f64;
            for &c in px {
                data.push((c as f64 * ratio).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(img.width(), img.height(), 3, data).expect("dimensions preserved")
}

/// Chosen parameters and the six scores, in evaluation order.
#[derive(Debug, Clone, Serialize)]
pub struct EnhanceOutcome {
    pub lambda_b: f64,
    pub lambda_e: f64,
    pub lambda_s: f64,
    /// Brightness-stage scores then contrast-stage scores.
    pub scores: [f64; 6],
}

/// Two-stage enhancement driven by an arbitrary scorer; calls the scorer
/// exactly six times. Ties go to the first-listed candidate.
pub fn enhance_with_scorer<F>(
    img: &RasterImage,
    cfg: &BoiemConfig,
    mut score: F,
) -> Result<(RasterImage, EnhanceOutcome)>
where
    F: FnMut(&RasterImage) -> Result<f64>,
{
    cfg.validate()?;
    let mut scores = [0.0f64; 6];

    let h0 = histogram_u8(&value_channel(img), true)?;
    let mut stage1: Option<(f64, RasterImage, f64)> = None;
    for (i, &lb) in cfg.lambda_b_candidates.iter().enumerate() {
        let (lut, _) = agcwd_lut(&h0, lb)?;
        let candidate = apply_value_lut(img, &lut);
        let s = score(&candidate)?;
        scores[i] = s;
        let better = match &stage1 {
            None => true,
            Some((best, _, _)) => s > *best,
        };
        if better {
            stage1 = Some((s, candidate, lb));
        }
    }
    let (_, bright, lambda_b) = stage1.expect("three candidates evaluated");

    let h_e = histogram_u8(&value_channel(&bright), true)?;
    let mut stage2: Option<(f64, RasterImage, (f64, f64))> = None;
    for (i, &(le, ls)) in cfg.lambda_pairs.iter().enumerate() {
        let target = rice_target_histogram(&h_e, le, ls, cfg)?;
        let lut = match_histograms(&h_e, &target);
        let candidate = apply_value_lut(&bright, &lut);
        let s = score(&candidate)?;
        scores[3 + i] = s;
        let better = match &stage2 {
            None => true,
            Some((best, _, _)) => s > *best,
        };
        if better {
            stage2 = Some((s, candidate, (le, ls)));
        }
    }
    let (_, enhanced, (lambda_e, lambda_s)) = stage2.expect("three candidates evaluated");

    Ok((
        enhanced,
        EnhanceOutcome {
            lambda_b,
            lambda_e,
            lambda_s,
            scores,
        },
    ))
}

/// Enhancement driven by the blind score (feature extraction + SVR).
pub fn enhance(
    img: &RasterImage,
    cfg: &BoiemConfig,
    model: &SvrModel,
    extractor: &Extractor,
) -> Result<(RasterImage, EnhanceOutcome)> {
    enhance_with_scorer(img, cfg, |candidate| {
        Ok(model.predict(&extractor.extract(candidate)?.values))
    })
}
