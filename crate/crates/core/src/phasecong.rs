//! Log-Gabor filter bank, phase-congruency map, and the PC-based
//! entropy feature.
//!
//! The map is computed per orientation from quadrature (even/odd) filter
//! responses obtained by frequency-domain filtering: the real part of the
//! inverse transform is the even response, the imaginary part the odd one.
//! Per-pixel congruency is phase-deviation-weighted amplitude, noise floor
//! subtracted per scale, sigmoid-weighted by filter-response spread, and
//! normalized by the total amplitude. Orientations are averaged.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::{entropy, histogram, PlaneF};

/// Filter-bank and congruency parameters.
#[derive(Debug, Clone)]
pub struct PcConfig {
    /// Number of filter scales (N).
    pub scales: usize,
    /// Number of filter orientations (K).
    pub orientations: usize,
    /// Wavelength of the finest-scale filter, in pixels.
    pub min_wavelength: f64,
    /// Wavelength multiplier between successive scales.
    pub multiplier: f64,
    /// Radial bandwidth ratio; sigma_r = -ln(ratio) gives ~2-octave
    /// filters at 0.55.
    pub sigma_ratio: f64,
    /// Angular bandwidth factor; sigma_o = factor * pi / K.
    pub angular_ratio: f64,
    /// Noise floor scaling (standard deviations above the Rayleigh mean).
    pub noise_factor: f64,
    /// Sigmoid cut-off u on the filter-response spread.
    pub cutoff: f64,
    /// Sigmoid gain v.
    pub gain: f64,
    /// Stabilizer for all divisions.
    pub epsilon: f64,
}

impl Default for PcConfig {
    fn default() -> Self {
        Self {
            scales: 4,
            orientations: 4,
            min_wavelength: 6.0,
            multiplier: 2.0,
            sigma_ratio: 0.55,
            angular_ratio: 0.55,
            noise_factor: 2.0,
            cutoff: 0.5,
            gain: 10.0,
            epsilon: 1e-4,
        }
    }
}

impl PcConfig {
    fn validate(&self) -> Result<()> {
        if self.scales < 2 {
            return Err(Error::InvalidParameter("pc.scales must be >= 2".into()));
        }
        if self.orientations < 2 {
            return Err(Error::InvalidParameter(
                "pc.orientations must be >= 2".into(),
            ));
        }
        if self.min_wavelength < 3.0 {
            return Err(Error::InvalidParameter(
                "pc.min_wavelength must be >= 3".into(),
            ));
        }
        if self.multiplier <= 1.0 {
            return Err(Error::InvalidParameter("pc.multiplier must be > 1".into()));
        }
        if !(0.0..1.0).contains(&self.sigma_ratio) || self.sigma_ratio == 0.0 {
            return Err(Error::InvalidParameter(
                "pc.sigma_ratio must be in (0, 1)".into(),
            ));
        }
        if self.angular_ratio <= 0.0 {
            return Err(Error::InvalidParameter(
                "pc.angular_ratio must be positive".into(),
            ));
        }
        if self.epsilon <= 0.0 || self.gain <= 0.0 || self.noise_factor < 0.0 {
            return Err(Error::InvalidParameter("degenerate pc config".into()));
        }
        Ok(())
    }
}

/// Frequency-domain log-Gabor bank for one padded image size.
///
/// Radial and angular components are kept separately; the filter for
/// (scale n, orientation k) is their pointwise product.
#[derive(Debug, Clone)]
pub struct LogGaborBank {
    cfg: PcConfig,
    width: usize,
    height: usize,
    padded_w: usize,
    padded_h: usize,
    radial: Vec<Vec<f64>>,
    angular: Vec<Vec<f64>>,
}

impl LogGaborBank {
    pub fn config(&self) -> &PcConfig {
        &self.cfg
    }

    pub fn filter_count(&self) -> usize {
        self.cfg.scales * self.cfg.orientations
    }

    pub fn padded_size(&self) -> (usize, usize) {
        (self.padded_w, self.padded_h)
    }

    /// Materializes the frequency-domain filter for one (scale,
    /// orientation) pair; row-major over the padded grid.
    pub fn filter_plane(&self, scale: usize, orientation: usize) -> Vec<f64> {
        self.radial[scale]
            .iter()
            .zip(&self.angular[orientation])
            .map(|(r, a)| r * a)
            .collect()
    }

    /// Center frequency (cycles/pixel) of the given scale.
    pub fn center_frequency(&self, scale: usize) -> f64 {
        1.0 / (self.cfg.min_wavelength * self.cfg.multiplier.powi(scale as i32))
    }
}

/// Phase-congruency map plus the per-pixel amplitude sum over all
/// scales and orientations.
#[derive(Debug, Clone)]
pub struct PcMap {
    pub plane: PlaneF,
    pub amplitude_sum: PlaneF,
}

/// Builds the frequency-domain bank for an image of the given size.
/// Odd dimensions are padded up to the next even size.
pub fn build_bank(cfg: &PcConfig, width: usize, height: usize) -> Result<LogGaborBank> {
    cfg.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("empty image".into()));
    }
    let pw = width + (width & 1);
    let ph = height + (height & 1);
    let sigma_r = -cfg.sigma_ratio.ln();
    let sigma_o = cfg.angular_ratio * std::f64::consts::PI / cfg.orientations as f64;

    // frequency coordinates in cycles/pixel, DC at index 0
    let fx: Vec<f64> = (0..pw)
        .map(|u| {
            let s = if u <= pw / 2 { u as isize } else { u as isize - pw as isize };
            s as f64 / pw as f64
        })
        .collect();
    let fy: Vec<f64> = (0..ph)
        .map(|v| {
            let s = if v <= ph / 2 { v as isize } else { v as isize - ph as isize };
            s as f64 / ph as f64
        })
        .collect();

    let mut radial = Vec::with_capacity(cfg.scales);
    for n in 0..cfg.scales {
        let omega0 = 1.0 / (cfg.min_wavelength * cfg.multiplier.powi(n as i32));
        let mut plane = vec![0.0f64; pw * ph];
        for (v, &fyv) in fy.iter().enumerate() {
            for (u, &fxu) in fx.iter().enumerate() {
                let omega = (fxu * fxu + fyv * fyv).sqrt();
                if omega > 0.0 {
                    let lr = (omega / omega0).ln();
                    plane[v * pw + u] = (-(lr * lr) / (2.0 * sigma_r * sigma_r)).exp();
                }
                // DC stays exactly zero
            }
        }
        radial.push(plane);
    }

    let mut angular = Vec::with_capacity(cfg.orientations);
    for k in 0..cfg.orientations {
        let ok = k as f64 * std::f64::consts::PI / cfg.orientations as f64;
        let (sk, ck) = ok.sin_cos();
        let mut plane = vec![0.0f64; pw * ph];
        for (v, &fyv) in fy.iter().enumerate() {
            for (u, &fxu) in fx.iter().enumerate() {
                // angle measured with y increasing downwards flipped so
                // orientations match image rows/columns
                let theta = (-fyv).atan2(fxu);
                let (st, ct) = theta.sin_cos();
                let dtheta = (st * ck - ct * sk).atan2(ct * ck + st * sk).abs();
                plane[v * pw + u] = (-(dtheta * dtheta) / (2.0 * sigma_o * sigma_o)).exp();
            }
        }
        angular.push(plane);
    }

    Ok(LogGaborBank {
        cfg: cfg.clone(),
        width,
        height,
        padded_w: pw,
        padded_h: ph,
        radial,
        angular,
    })
}

fn fft_2d(buf: &mut [Complex<f64>], w: usize, h: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let fft_w = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    let fft_h = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    for row in buf.chunks_exact_mut(w) {
        fft_w.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        fft_h.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
    if inverse {
        let scale = 1.0 / (w * h) as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }
}

fn median_inplace(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    let hi = *m;
    if n % 2 == 1 {
        hi
    } else {
        let (_, m2, _) = values[..mid].select_nth_unstable_by(mid - 1, |a, b| a.partial_cmp(b).unwrap());
        0.5 * (hi + *m2)
    }
}

/// Computes the phase-congruency map of a luminance plane.
pub fn pc_map(gray: &PlaneF, bank: &LogGaborBank) -> Result<PcMap> {
    if gray.width() != bank.width || gray.height() != bank.height {
        return Err(Error::DimensionMismatch(format!(
            "plane is {}x{}, bank was built for {}x{}",
            gray.width(),
            gray.height(),
            bank.width,
            bank.height
        )));
    }
    let cfg = &bank.cfg;
    let (pw, ph) = (bank.padded_w, bank.padded_h);
    let npix = pw * ph;
    let nscale = cfg.scales;
    let eps = cfg.epsilon;

    let mut planner = FftPlanner::new();
    let mut spectrum = vec![Complex::new(0.0, 0.0); npix];
    for y in 0..gray.height() {
        for x in 0..gray.width() {
            spectrum[y * pw + x] = Complex::new(gray.get(x, y), 0.0);
        }
    }
    fft_2d(&mut spectrum, pw, ph, &mut planner, false);

    // Rayleigh constants: median -> scale, then mean + k * sigma
    let rayleigh_scale = 1.0 / (4.0f64.ln()).sqrt();
    let mean_sigma_factor = (std::f64::consts::PI / 2.0).sqrt()
        + cfg.noise_factor * ((4.0 - std::f64::consts::PI) / 2.0).sqrt();

    let mut pc_sum = vec![0.0f64; npix];
    let mut amp_total = vec![0.0f64; npix];

    let mut responses: Vec<Vec<Complex<f64>>> = vec![vec![Complex::new(0.0, 0.0); npix]; nscale];
    let mut filtered = vec![Complex::new(0.0, 0.0); npix];

    for k in 0..cfg.orientations {
        let ang = &bank.angular[k];
        for (n, resp) in responses.iter_mut().enumerate() {
            let rad = &bank.radial[n];
            for i in 0..npix {
                filtered[i] = spectrum[i] * (rad[i] * ang[i]);
            }
            fft_2d(&mut filtered, pw, ph, &mut planner, true);
            resp.copy_from_slice(&filtered);
        }

        // noise floor from the finest-scale amplitude distribution
        let mut finest_amp: Vec<f64> = responses[0].iter().map(|c| c.norm()).collect();
        let tau = median_inplace(&mut finest_amp) * rayleigh_scale;
        let thresholds: Vec<f64> = (0..nscale)
            .map(|n| tau * cfg.multiplier.powi(-(n as i32)) * mean_sigma_factor)
            .collect();

        for i in 0..npix {
            let mut sum_e = 0.0;
            let mut sum_o = 0.0;
            let mut sum_a = 0.0;
            let mut max_a = 0.0f64;
            for resp in &responses {
                let c = resp[i];
                sum_e += c.re;
                sum_o += c.im;
                let a = c.norm();
                sum_a += a;
                if a > max_a {
                    max_a = a;
                }
            }
            let xenergy = (sum_e * sum_e + sum_o * sum_o).sqrt() + eps;
            let mean_e = sum_e / xenergy;
            let mean_o = sum_o / xenergy;
            let mut energy = 0.0;
            for (resp, &t_n) in responses.iter().zip(&thresholds) {
                let c = resp[i];
                // A_n * (cos(theta_n - mean) - |sin(theta_n - mean)|)
                let dev = c.re * mean_e + c.im * mean_o - (c.re * mean_o - c.im * mean_e).abs();
                energy += (dev - t_n).max(0.0);
            }
            let spread = sum_a / (nscale as f64 * (max_a + eps));
            let weight = 1.0 / (1.0 + ((cfg.cutoff - spread) * cfg.gain).exp());
            let pc = (weight * energy / (eps + sum_a)).clamp(0.0, 1.0);
            pc_sum[i] += pc;
            amp_total[i] += sum_a;
        }
    }

    let scale = 1.0 / cfg.orientations as f64;
    let (w, h) = (bank.width, bank.height);
    let mut plane = Vec::with_capacity(w * h);
    let mut amps = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            plane.push(pc_sum[y * pw + x] * scale);
            amps.push(amp_total[y * pw + x]);
        }
    }
    Ok(PcMap {
        plane: PlaneF::new(w, h, plane)?,
        amplitude_sum: PlaneF::new(w, h, amps)?,
    })
}

/// Entropy (bits) of the gray values at the pixels whose congruency is in
/// the top 40% of the map (60th-percentile threshold, ties included).
pub fn pc_entropy(gray: &PlaneF, pc: &PcMap) -> Result<f64> {
    if gray.width() != pc.plane.width() || gray.height() != pc.plane.height() {
        return Err(Error::DimensionMismatch(
            "gray plane and PC map differ in size".into(),
        ));
    }
    let n = gray.data().len();
    let mut values: Vec<f64> = pc.plane.data().to_vec();
    let rank = ((0.6 * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, thr, _) = values.select_nth_unstable_by(rank, |a, b| a.partial_cmp(b).unwrap());
    let threshold = *thr;

    let selected: Vec<f64> = gray
        .data()
        .iter()
        .zip(pc.plane.data())
        .filter(|(_, &p)| p >= threshold)
        .map(|(&g, _)| g)
        .collect();
    let plane = PlaneF::new(selected.len(), 1, selected)?;
    entropy(&histogram(&plane, true)?)
}
