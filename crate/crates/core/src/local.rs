//! Local features: contrast energy on three opponent channels and
//! wavelet log-energy sharpness.

use crate::error::{Error, Result};
use crate::image::{convolve_2d, opponent_channels, to_gray, PlaneF, RasterImage};

/// Contrast-energy parameters. Channels are normalized to [0,1] scale
/// before filtering, so the noise thresholds are on that scale too.
#[derive(Debug, Clone)]
pub struct CeParams {
    /// Width of the Gaussian second-derivative filters, in pixels.
    pub gauss_sigma: f64,
    /// Contrast-gain semi-saturation constant.
    pub theta: f64,
    /// Noise thresholds per channel.
    pub phi_gr: f64,
    pub phi_yb: f64,
    pub phi_rg: f64,
}

impl Default for CeParams {
    fn default() -> Self {
        Self {
            gauss_sigma: 1.0,
            theta: 0.1,
            phi_gr: 0.23,
            phi_yb: 0.23,
            phi_rg: 0.05,
        }
    }
}

impl CeParams {
    fn validate(&self) -> Result<()> {
        if self.gauss_sigma <= 0.0
            || self.theta <= 0.0
            || self.phi_gr <= 0.0
            || self.phi_yb <= 0.0
            || self.phi_rg <= 0.0
        {
            return Err(Error::InvalidParameter(
                "contrast-energy parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Horizontal and vertical Gaussian second-derivative kernels,
/// zero-mean so constant regions produce an exactly zero response.
pub fn gaussian_second_derivative_kernels(sigma: f64) -> (PlaneF, PlaneF) {
    let radius = (3.0 * sigma).ceil() as usize;
    let n = 2 * radius + 1;
    let s2 = sigma * sigma;
    let mut h = Vec::with_capacity(n * n);
    let mut v = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let dx = x as f64 - radius as f64;
            let dy = y as f64 - radius as f64;
            let g = (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
            h.push((dx * dx - s2) / (s2 * s2) * g);
            v.push((dy * dy - s2) / (s2 * s2) * g);
        }
    }
    for k in [&mut h, &mut v] {
        let mean = k.iter().sum::<f64>() / k.len() as f64;
        for t in k.iter_mut() {
            *t -= mean;
        }
    }
    (
        PlaneF::new(n, n, h).unwrap(),
        PlaneF::new(n, n, v).unwrap(),
    )
}

fn channel_contrast_energy(channel: &PlaneF, fh: &PlaneF, fv: &PlaneF, theta: f64, phi: f64) -> Result<f64> {
    let rh = convolve_2d(channel, fh)?;
    let rv = convolve_2d(channel, fv)?;
    let y: Vec<f64> = rh
        .data()
        .iter()
        .zip(rv.data())
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    let alpha = y.iter().cloned().fold(0.0f64, f64::max);
    if alpha == 0.0 {
        // constant channel: zero contrast by definition
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for &yv in &y {
        acc += (alpha * yv / (yv + alpha * theta) - phi).max(0.0);
    }
    Ok(acc / y.len() as f64)
}

/// Contrast energy (CE_gr, CE_yb, CE_rg). Gray inputs use the luminance
/// channel only; the opponent energies are zero.
pub fn contrast_energy(img: &RasterImage, params: &CeParams) -> Result<(f64, f64, f64)> {
    params.validate()?;
    let (fh, fv) = gaussian_second_derivative_kernels(params.gauss_sigma);
    let scale = |p: &PlaneF| {
        PlaneF::new(
            p.width(),
            p.height(),
            p.data().iter().map(|v| v / 255.0).collect(),
        )
        .unwrap()
    };
    let gr = scale(&to_gray(img));
    let ce_gr = channel_contrast_energy(&gr, &fh, &fv, params.theta, params.phi_gr)?;
    if img.channels() == 1 {
        return Ok((ce_gr, 0.0, 0.0));
    }
    let (yb, rg) = opponent_channels(img)?;
    let ce_yb = channel_contrast_energy(&scale(&yb), &fh, &fv, params.theta, params.phi_yb)?;
    let ce_rg = channel_contrast_energy(&scale(&rg), &fh, &fv, params.theta, params.phi_rg)?;
    Ok((ce_gr, ce_yb, ce_rg))
}

// CDF 9/7 lifting coefficients (Daubechies-Sweldens factorization).
const LIFT_A: f64 = -1.586_134_342_059_924;
const LIFT_B: f64 = -0.052_980_118_572_961;
const LIFT_C: f64 = 0.882_911_075_530_934;
const LIFT_D: f64 = 0.443_506_852_043_971;
const SCALE_Z: f64 = 1.149_604_398_860_098;

#[inline]
fn wmirror(i: isize, n: usize) -> usize {
    // whole-sample symmetric extension: x[-1] = x[1], x[n] = x[n-2]
    let n = n as isize;
    let period = 2 * (n - 1).max(1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// One forward lifting pass over an interleaved signal; low half first
/// in the output.
fn lift_forward_1d(x: &[f64], low: &mut Vec<f64>, high: &mut Vec<f64>) {
    let n = x.len();
    low.clear();
    high.clear();
    if n == 1 {
        low.push(x[0] * SCALE_Z);
        return;
    }
    let mut y = x.to_vec();
    let at = |y: &[f64], i: isize| y[wmirror(i, n)];
    // predict 1
    for i in (1..n).step_by(2) {
        y[i] += LIFT_A * (at(&y, i as isize - 1) + at(&y, i as isize + 1));
    }
    // update 1
    for i in (0..n).step_by(2) {
        y[i] += LIFT_B * (at(&y, i as isize - 1) + at(&y, i as isize + 1));
    }
    // predict 2
    for i in (1..n).step_by(2) {
        y[i] += LIFT_C * (at(&y, i as isize - 1) + at(&y, i as isize + 1));
    }
    // update 2
    for i in (0..n).step_by(2) {
        y[i] += LIFT_D * (at(&y, i as isize - 1) + at(&y, i as isize + 1));
    }
    for (i, v) in y.iter().enumerate() {
        if i % 2 == 0 {
            low.push(v * SCALE_Z);
        } else {
            high.push(v / SCALE_Z);
        }
    }
}

/// Exact inverse of [`lift_forward_1d`].
fn lift_inverse_1d(low: &[f64], high: &[f64], out: &mut Vec<f64>) {
    let n = low.len() + high.len();
    out.clear();
    if n == 1 {
        out.push(low[0] / SCALE_Z);
        return;
    }
    let mut y = vec![0.0f64; n];
    for (i, v) in low.iter().enumerate() {
        y[2 * i] = v / SCALE_Z;
    }
    for (i, v) in high.iter().enumerate() {
        y[2 * i + 1] = v * SCALE_Z;
    }
    let at = |y: &[f64], i: isize| y[wmirror(i, n)];
    for i in (0..n).step_by(2) {
        y[i] -= LIFT_D * (at(&y, i as isize - 1) + at(&y, i as isize + 1));
    }
    for i in (1..n).step_by(2) {
        y[i] -= LIFT_C * (at(&y, i as isize - 1) + at(&y, i as isize + 1));
    }
    for i in (0..n).step_by(2) {
        y[i] -= LIFT_B * (at(&y, i as isize - 1) + at(&y, i as isize + 1));
    }
    for i in (1..n).step_by(2) {
        y[i] -= LIFT_A * (at(&y, i as isize - 1) + at(&y, i as isize + 1));
    }
    out.extend_from_slice(&y);
}

/// Detail subbands of one decomposition level.
#[derive(Debug, Clone)]
pub struct DwtLevel {
    /// Low in x, high in y.
    pub lh: PlaneF,
    /// High in x, low in y.
    pub hl: PlaneF,
    /// High in both directions.
    pub hh: PlaneF,
}

/// Three-level 9/7 pyramid; `levels[0]` is the finest.
#[derive(Debug, Clone)]
pub struct DwtPyramid {
    pub levels: Vec<DwtLevel>,
    pub ll: PlaneF,
}

fn dwt_level(p: &PlaneF) -> (PlaneF, DwtLevel) {
    let (w, h) = (p.width(), p.height());
    let lw = w.div_ceil(2);
    let hw = w / 2;
    // rows
    let mut row_low = vec![0.0f64; lw * h];
    let mut row_high = vec![0.0f64; hw * h];
    let mut lo = Vec::with_capacity(lw);
    let mut hi = Vec::with_capacity(hw);
    let mut line = vec![0.0f64; w.max(h)];
    for y in 0..h {
        line.clear();
        line.extend((0..w).map(|x| p.get(x, y)));
        lift_forward_1d(&line, &mut lo, &mut hi);
        row_low[y * lw..(y + 1) * lw].copy_from_slice(&lo);
        row_high[y * hw..(y + 1) * hw].copy_from_slice(&hi);
    }
    // columns
    let lh_h = h.div_ceil(2);
    let hh_h = h / 2;
    let mut split_cols = |buf: &[f64], bw: usize| -> (Vec<f64>, Vec<f64>) {
        let mut top = vec![0.0f64; bw * lh_h];
        let mut bottom = vec![0.0f64; bw * hh_h];
        for x in 0..bw {
            line.clear();
            line.extend((0..h).map(|y| buf[y * bw + x]));
            lift_forward_1d(&line, &mut lo, &mut hi);
            for (y, v) in lo.iter().enumerate() {
                top[y * bw + x] = *v;
            }
            for (y, v) in hi.iter().enumerate() {
                bottom[y * bw + x] = *v;
            }
        }
        (top, bottom)
    };
    let (ll, lh) = split_cols(&row_low, lw);
    let (hl, hh) = split_cols(&row_high, hw);
    (
        PlaneF::new(lw, lh_h, ll).unwrap(),
        DwtLevel {
            lh: PlaneF::new(lw, hh_h, lh).unwrap(),
            hl: PlaneF::new(hw, lh_h, hl).unwrap(),
            hh: PlaneF::new(hw, hh_h, hh).unwrap(),
        },
    )
}

fn idwt_level(ll: &PlaneF, level: &DwtLevel) -> PlaneF {
    let lw = ll.width();
    let hw = level.hl.width();
    let (w, h) = (lw + hw, ll.height() + level.lh.height());
    // columns first (reverse of forward order)
    let merge_cols = |top: &PlaneF, bottom: &PlaneF| -> Vec<f64> {
        let bw = top.width();
        let mut out = vec![0.0f64; bw * h];
        let mut lo = Vec::with_capacity(top.height());
        let mut hi = Vec::with_capacity(bottom.height());
        let mut col = Vec::with_capacity(h);
        for x in 0..bw {
            lo.clear();
            lo.extend((0..top.height()).map(|y| top.get(x, y)));
            hi.clear();
            hi.extend((0..bottom.height()).map(|y| bottom.get(x, y)));
            lift_inverse_1d(&lo, &hi, &mut col);
            for (y, v) in col.iter().enumerate() {
                out[y * bw + x] = *v;
            }
        }
        out
    };
    let row_low = merge_cols(ll, &level.lh);
    let row_high = merge_cols(&level.hl, &level.hh);
    let mut out = vec![0.0f64; w * h];
    let mut lo = Vec::with_capacity(lw);
    let mut hi = Vec::with_capacity(hw);
    let mut line = Vec::with_capacity(w);
    for y in 0..h {
        lo.clear();
        lo.extend_from_slice(&row_low[y * lw..(y + 1) * lw]);
        hi.clear();
        hi.extend_from_slice(&row_high[y * hw..(y + 1) * hw]);
        lift_inverse_1d(&lo, &hi, &mut line);
        out[y * w..(y + 1) * w].copy_from_slice(&line);
    }
    PlaneF::new(w, h, out).unwrap()
}

/// Three-level CDF 9/7 decomposition with symmetric extension.
pub fn dwt97_3level(gray: &PlaneF) -> Result<DwtPyramid> {
    if gray.width() < 32 || gray.height() < 32 {
        return Err(Error::TooSmall {
            width: gray.width(),
            height: gray.height(),
            min: 32,
        });
    }
    let mut current = gray.clone();
    let mut levels = Vec::with_capacity(3);
    for _ in 0..3 {
        let (ll, level) = dwt_level(&current);
        levels.push(level);
        current = ll;
    }
    Ok(DwtPyramid {
        levels,
        ll: current,
    })
}

/// Inverse of [`dwt97_3level`]; used by the reconstruction tests.
pub fn idwt97_3level(pyr: &DwtPyramid) -> PlaneF {
    let mut current = pyr.ll.clone();
    for level in pyr.levels.iter().rev() {
        current = idwt_level(&current, level);
    }
    current
}

fn subband_log_energy(p: &PlaneF) -> f64 {
    let sum_sq: f64 = p.data().iter().map(|v| v * v).sum();
    (1.0 + sum_sq / p.data().len() as f64).log10()
}

/// Log-energy weight on the diagonal subband.
pub const LOG_ENERGY_HH_WEIGHT: f64 = 4.0;

/// Per-level log-energies of levels 2 and 3: the LH/HL mean is blended
/// with the HH term at weight 4.
pub fn log_energy(pyr: &DwtPyramid) -> (f64, f64) {
    let level_energy = |lvl: &DwtLevel| -> f64 {
        let le_lh = subband_log_energy(&lvl.lh);
        let le_hl = subband_log_energy(&lvl.hl);
        let le_hh = subband_log_energy(&lvl.hh);
        (0.5 * (le_lh + le_hl) + LOG_ENERGY_HH_WEIGHT * le_hh) / (1.0 + LOG_ENERGY_HH_WEIGHT)
    };
    (level_energy(&pyr.levels[1]), level_energy(&pyr.levels[2]))
}
