//! Image substrate: 8-bit raster images, real-valued planes, color
//! transforms, 256-bin histograms, entropy, and 2-D convolution.
//!
//! Everything downstream (feature extraction, the full-reference metric,
//! the enhancer) is built on these few types. All operations are pure.

use std::path::Path;

use crate::error::{Error, Result};

/// Minimum edge length accepted by the feature-extraction entry points.
pub const MIN_FEATURE_SIZE: usize = 32;

/// Decoded 8-bit image, row-major, interleaved RGB when `channels == 3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: u8,
    data: Vec<u8>,
}

impl RasterImage {
    /// Wraps raw samples. `channels` must be 1 (gray) or 3 (RGB) and
    /// `data.len()` must equal `width * height * channels`.
    pub fn new(width: usize, height: usize, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Malformed("zero-sized image".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedImage(format!(
                "{channels} channels (only 1 or 3 supported)"
            )));
        }
        let expect = width * height * channels as usize;
        if data.len() != expect {
            return Err(Error::Malformed(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// RGB triple at (x, y); gray images report the sample three times.
    pub fn rgb(&self, x: usize, y: usize) -> (u8, u8, u8) {
        let i = (y * self.width + x) * self.channels as usize;
        if self.channels == 1 {
            let v = self.data[i];
            (v, v, v)
        } else {
            (self.data[i], self.data[i + 1], self.data[i + 2])
        }
    }

    /// Rejects images below the feature-extraction minimum size.
    pub fn check_feature_size(&self) -> Result<()> {
        if self.width < MIN_FEATURE_SIZE || self.height < MIN_FEATURE_SIZE {
            return Err(Error::TooSmall {
                width: self.width,
                height: self.height,
                min: MIN_FEATURE_SIZE,
            });
        }
        Ok(())
    }

    /// Decodes a PNG, BMP, or baseline JPEG file. Gray inputs stay
    /// single-plane; everything else is converted to 8-bit RGB.
    pub fn decode_file(path: &Path) -> Result<Self> {
        let dynimg = image::open(path)?;
        Ok(match dynimg {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = (g.width() as usize, g.height() as usize);
                RasterImage::new(w, h, 1, g.into_raw())?
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = (rgb.width() as usize, rgb.height() as usize);
                RasterImage::new(w, h, 3, rgb.into_raw())?
            }
        })
    }

    /// Encodes to PNG or BMP, chosen by file extension. PNG round-trips
    /// both gray and RGB losslessly; BMP is always written as 24-bit RGB.
    /// JPEG output is refused (decode-only format).
    pub fn encode_file(&self, path: &Path) -> Result<()> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        match ext.as_str() {
            "png" => {
                image::save_buffer_with_format(
                    path,
                    &self.data,
                    self.width as u32,
                    self.height as u32,
                    color,
                    image::ImageFormat::Png,
                )?;
            }
            "bmp" => {
                let rgb;
                let (bytes, color) = if self.channels == 1 {
                    rgb = self
                        .data
                        .iter()
                        .flat_map(|&v| [v, v, v])
                        .collect::<Vec<u8>>();
                    (&rgb[..], image::ExtendedColorType::Rgb8)
                } else {
                    (&self.data[..], color)
                };
                image::save_buffer_with_format(
                    path,
                    bytes,
                    self.width as u32,
                    self.height as u32,
                    color,
                    image::ImageFormat::Bmp,
                )?;
            }
            other => {
                return Err(Error::UnsupportedImage(format!(
                    "cannot encode `.{other}` (PNG and BMP only)"
                )))
            }
        }
        Ok(())
    }

    /// SHA-256 of the decoded pixel content (dimensions + raw samples).
    /// Container-independent, used for train/eval overlap checks.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.width as u64).to_le_bytes());
        h.update((self.height as u64).to_le_bytes());
        h.update([self.channels]);
        h.update(&self.data);
        let digest = h.finalize();
        let mut s = String::with_capacity(64);
        for b in digest {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

/// Real-valued plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneF {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl PlaneF {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Malformed(format!(
                "plane data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("plane contains non-finite samples".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with symmetric (mirror) boundary extension.
    #[inline]
    pub fn get_mirrored(&self, x: isize, y: isize) -> f64 {
        let xi = mirror_index(x, self.width);
        let yi = mirror_index(y, self.height);
        self.data[yi * self.width + xi]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Half-sample symmetric reflection: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
#[inline]
pub(crate) fn mirror_index(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// 256-bin gray-level distribution (raw counts or probability masses).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram256 {
    pub bins: [f64; 256],
}

impl Histogram256 {
    pub fn from_bins(bins: [f64; 256]) -> Result<Self> {
        if bins.iter().any(|&b| !b.is_finite() || b < 0.0) {
            return Err(Error::Malformed("histogram bin negative or non-finite".into()));
        }
        Ok(Self { bins })
    }

    pub fn sum(&self) -> f64 {
        self.bins.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= 1e-9
    }

    /// Returns the probability-mass version of this histogram.
    pub fn normalize(&self) -> Result<Self> {
        let s = self.sum();
        if s <= 0.0 {
            return Err(Error::Malformed("cannot normalize an empty histogram".into()));
        }
        let mut bins = self.bins;
        for b in &mut bins {
            *b /= s;
        }
        Ok(Self { bins })
    }
}

/// Luminance plane: gr = 0.299 R + 0.587 G + 0.114 B.
/// Single-plane inputs pass through as a copy.
pub fn to_gray(img: &RasterImage) -> PlaneF {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h);
    if img.channels() == 1 {
        data.extend(img.data().iter().map(|&v| v as f64));
    } else {
        for px in img.data().chunks_exact(3) {
            data.push(0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64);
        }
    }
    PlaneF {
        width: w,
        height: h,
        data,
    }
}

/// Opponent channels yb = 0.5(R+G) - B and rg = R - G.
pub fn opponent_channels(img: &RasterImage) -> Result<(PlaneF, PlaneF)> {
    if img.channels() != 3 {
        return Err(Error::NeedsColor);
    }
    let (w, h) = (img.width(), img.height());
    let mut yb = Vec::with_capacity(w * h);
    let mut rg = Vec::with_capacity(w * h);
    for px in img.data().chunks_exact(3) {
        let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
        yb.push(0.5 * (r + g) - b);
        rg.push(r - g);
    }
    Ok((
        PlaneF {
            width: w,
            height: h,
            data: yb,
        },
        PlaneF {
            width: w,
            height: h,
            data: rg,
        },
    ))
}

/// HSV saturation per pixel: (max - min) / max over RGB, 0 where max = 0.
pub fn saturation_plane(img: &RasterImage) -> Result<PlaneF> {
    if img.channels() != 3 {
        return Err(Error::NeedsColor);
    }
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h);
    for px in img.data().chunks_exact(3) {
        let max = px[0].max(px[1]).max(px[2]) as f64;
        let min = px[0].min(px[1]).min(px[2]) as f64;
        data.push(if max == 0.0 { 0.0 } else { (max - min) / max });
    }
    Ok(PlaneF {
        width: w,
        height: h,
        data,
    })
}

/// Bins plane samples by rounding to the nearest integer level.
/// Samples must already lie in [0, 255].
pub fn histogram(p: &PlaneF, normalized: bool) -> Result<Histogram256> {
    let mut bins = [0.0f64; 256];
    for &v in p.data() {
        if !(0.0..=255.0).contains(&v) {
            return Err(Error::SampleOutOfRange { value: v });
        }
        let level = (v.round() as i64).clamp(0, 255) as usize;
        bins[level] += 1.0;
    }
    let h = Histogram256 { bins };
    if normalized {
        h.normalize()
    } else {
        Ok(h)
    }
}

/// Histogram of raw 8-bit samples (exact integer binning).
pub fn histogram_u8(samples: &[u8], normalized: bool) -> Result<Histogram256> {
    let mut bins = [0.0f64; 256];
    for &v in samples {
        bins[v as usize] += 1.0;
    }
    let h = Histogram256 { bins };
    if normalized {
        h.normalize()
    } else {
        Ok(h)
    }
}

/// Shannon entropy in bits: -sum p_i log2 p_i with 0 log 0 = 0.
/// Requires a normalized histogram; range [0, 8].
pub fn entropy(h: &Histogram256) -> Result<f64> {
    if !h.is_normalized() {
        return Err(Error::UnnormalizedHistogram { sum: h.sum() });
    }
    let mut e = 0.0;
    for &p in &h.bins {
        if p > 0.0 {
            e -= p * p.log2();
        }
    }
    Ok(e)
}

/// Direct 2-D convolution with symmetric (mirror) boundary extension.
/// Kernel dimensions must be odd; output has the input's size.
pub fn convolve_2d(p: &PlaneF, kernel: &PlaneF) -> Result<PlaneF> {
    let (kw, kh) = (kernel.width(), kernel.height());
    if kw % 2 == 0 || kh % 2 == 0 {
        return Err(Error::EvenKernel {
            width: kw,
            height: kh,
        });
    }
    let (rx, ry) = ((kw / 2) as isize, (kh / 2) as isize);
    let (w, h) = (p.width(), p.height());
    let mut out = vec![0.0f64; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for ky in -ry..=ry {
                for kx in -rx..=rx {
                    let kv = kernel.get((kx + rx) as usize, (ky + ry) as usize);
                    // convolution flips the kernel
                    acc += kv * p.get_mirrored(x - kx, y - ky);
                }
            }
            out[(y as usize) * w + x as usize] = acc;
        }
    }
    Ok(PlaneF {
        width: w,
        height: h,
        data: out,
    })
}

/// Normalized 2-D Gaussian kernel with the given radius (size 2r+1).
pub fn gaussian_kernel(sigma: f64, radius: usize) -> PlaneF {
    let n = 2 * radius + 1;
    let mut data = Vec::with_capacity(n * n);
    let mut sum = 0.0;
    for y in 0..n {
        for x in 0..n {
            let dx = x as f64 - radius as f64;
            let dy = y as f64 - radius as f64;
            let v = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            data.push(v);
            sum += v;
        }
    }
    for v in &mut data {
        *v /= sum;
    }
    PlaneF {
        width: n,
        height: n,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn solid(w: usize, h: usize, rgb: (u8, u8, u8)) -> RasterImage {
        let mut data = Vec::with_capacity(w * h * 3);
        for _ in 0..w * h {
            data.extend([rgb.0, rgb.1, rgb.2]);
        }
        RasterImage::new(w, h, 3, data).unwrap()
    }

    #[test]
    fn gray_weights() {
        let img = solid(4, 4, (255, 255, 255));
        assert_abs_diff_eq!(to_gray(&img).get(0, 0), 255.0, epsilon = 1e-12);
        let img = solid(4, 4, (0, 0, 0));
        assert_eq!(to_gray(&img).get(1, 1), 0.0);
        let img = solid(4, 4, (255, 0, 0));
        assert_abs_diff_eq!(to_gray(&img).get(2, 3), 76.245, epsilon = 1e-9);
    }

    #[test]
    fn gray_passthrough() {
        let img = RasterImage::new(2, 2, 1, vec![7, 8, 9, 10]).unwrap();
        let g = to_gray(&img);
        assert_eq!(g.data(), &[7.0, 8.0, 9.0, 10.0]);
    }

    #[test]
    fn opponent_values() {
        let img = solid(2, 2, (93, 93, 93));
        let (yb, rg) = opponent_channels(&img).unwrap();
        assert_eq!(yb.get(0, 0), 0.0);
        assert_eq!(rg.get(0, 0), 0.0);

        let img = solid(2, 2, (255, 0, 0));
        let (yb, rg) = opponent_channels(&img).unwrap();
        assert_eq!(yb.get(1, 1), 127.5);
        assert_eq!(rg.get(1, 1), 255.0);

        let img = solid(2, 2, (0, 0, 255));
        let (yb, rg) = opponent_channels(&img).unwrap();
        assert_eq!(yb.get(0, 1), -255.0);
        assert_eq!(rg.get(0, 1), 0.0);
    }

    #[test]
    fn opponent_rejects_gray() {
        let img = RasterImage::new(2, 2, 1, vec![0; 4]).unwrap();
        assert!(matches!(
            opponent_channels(&img),
            Err(Error::NeedsColor)
        ));
    }

    #[test]
    fn saturation_values() {
        assert_eq!(saturation_plane(&solid(2, 2, (80, 80, 80))).unwrap().get(0, 0), 0.0);
        assert_eq!(saturation_plane(&solid(2, 2, (255, 0, 0))).unwrap().get(0, 0), 1.0);
        assert_abs_diff_eq!(
            saturation_plane(&solid(2, 2, (200, 100, 100))).unwrap().get(0, 0),
            0.5,
            epsilon = 1e-12
        );
        // black pixel: max = 0 case
        assert_eq!(saturation_plane(&solid(2, 2, (0, 0, 0))).unwrap().get(1, 1), 0.0);
    }

    #[test]
    fn histogram_basics() {
        let p = PlaneF::new(4, 4, vec![128.0; 16]).unwrap();
        let h = histogram(&p, true).unwrap();
        assert_eq!(h.bins[128], 1.0);

        let data: Vec<f64> = (0..256).map(|v| v as f64).collect();
        let p = PlaneF::new(16, 16, data).unwrap();
        let h = histogram(&p, true).unwrap();
        assert!(h.bins.iter().all(|&b| (b - 1.0 / 256.0).abs() < 1e-15));
        assert_abs_diff_eq!(entropy(&h).unwrap(), 8.0, epsilon = 1e-12);

        let mut data = vec![10.0; 8];
        data.extend(vec![200.0; 8]);
        let p = PlaneF::new(4, 4, data).unwrap();
        let h = histogram(&p, true).unwrap();
        assert_eq!(h.bins[10], 0.5);
        assert_eq!(h.bins[200], 0.5);
        assert_abs_diff_eq!(entropy(&h).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn histogram_rejects_out_of_range() {
        let p = PlaneF::new(2, 1, vec![12.0, 256.5]).unwrap();
        assert!(matches!(
            histogram(&p, true),
            Err(Error::SampleOutOfRange { .. })
        ));
    }

    #[test]
    fn entropy_bounds_and_rejection() {
        let mut bins = [0.0; 256];
        bins[3] = 1.0;
        let h = Histogram256::from_bins(bins).unwrap();
        assert_eq!(entropy(&h).unwrap(), 0.0);

        let mut bins = [0.0; 256];
        bins[0] = 2.0;
        let h = Histogram256::from_bins(bins).unwrap();
        assert!(matches!(
            entropy(&h),
            Err(Error::UnnormalizedHistogram { .. })
        ));
    }

    #[test]
    fn convolve_identity_and_box() {
        let p = PlaneF::new(3, 3, (0..9).map(|v| v as f64).collect()).unwrap();
        let ident = PlaneF::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(convolve_2d(&p, &ident).unwrap(), p);

        // 3x3 box on an impulse spreads 1/9 (away from borders)
        let mut data = vec![0.0; 49];
        data[3 * 7 + 3] = 1.0;
        let p = PlaneF::new(7, 7, data).unwrap();
        let boxk = PlaneF::new(3, 3, vec![1.0 / 9.0; 9]).unwrap();
        let out = convolve_2d(&p, &boxk).unwrap();
        for y in 2..=4 {
            for x in 2..=4 {
                assert_abs_diff_eq!(out.get(x, y), 1.0 / 9.0, epsilon = 1e-15);
            }
        }
        assert_eq!(out.get(0, 0), 0.0);
    }

    #[test]
    fn convolve_rejects_even_kernel() {
        let p = PlaneF::zeros(4, 4);
        let k = PlaneF::zeros(2, 3);
        assert!(matches!(
            convolve_2d(&p, &k),
            Err(Error::EvenKernel { .. })
        ));
    }

    #[test]
    fn mirror_indexing() {
        assert_eq!(mirror_index(-1, 5), 0);
        assert_eq!(mirror_index(-2, 5), 1);
        assert_eq!(mirror_index(5, 5), 4);
        assert_eq!(mirror_index(6, 5), 3);
        assert_eq!(mirror_index(2, 5), 2);
    }

    proptest! {
        // conv(a*p1 + b*p2, k) = a*conv(p1,k) + b*conv(p2,k)
        #[test]
        fn convolution_is_linear(
            seed in 0u64..1000,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (w, h) = (9usize, 7usize);
            let p1 = PlaneF::new(w, h, (0..w * h).map(|_| rng.gen_range(-10.0..10.0)).collect()).unwrap();
            let p2 = PlaneF::new(w, h, (0..w * h).map(|_| rng.gen_range(-10.0..10.0)).collect()).unwrap();
            let k = PlaneF::new(3, 3, (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();

            let combo = PlaneF::new(
                w,
                h,
                p1.data().iter().zip(p2.data()).map(|(x, y)| a * x + b * y).collect(),
            ).unwrap();
            let lhs = convolve_2d(&combo, &k).unwrap();
            let c1 = convolve_2d(&p1, &k).unwrap();
            let c2 = convolve_2d(&p2, &k).unwrap();
            for i in 0..w * h {
                let rhs = a * c1.data()[i] + b * c2.data()[i];
                let scale = rhs.abs().max(1.0);
                prop_assert!((lhs.data()[i] - rhs).abs() <= 1e-9 * scale);
            }
        }

        // entropy(histogram(p)) ignores pixel positions
        #[test]
        fn entropy_is_permutation_invariant(seed in 0u64..1000) {
            use rand::{seq::SliceRandom, Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 64usize;
            let mut data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..255.0)).collect();
            let p = PlaneF::new(n, n, data.clone()).unwrap();
            let e1 = entropy(&histogram(&p, true).unwrap()).unwrap();
            data.shuffle(&mut rng);
            let q = PlaneF::new(n, n, data).unwrap();
            let e2 = entropy(&histogram(&q, true).unwrap()).unwrap();
            prop_assert_eq!(e1, e2);
        }
    }
}
