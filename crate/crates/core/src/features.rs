//! Assembles the ordered 17-feature vector from one image.
//!
//! Order is frozen as the toolkit contract:
//! f01 E_pc | f02-f04 CE_gr/yb/rg | f05-f06 LE_2/LE_3 |
//! f07-f12 brightness entropies | f13 S | f14 C | f15 nu | f16 sigma^2 |
//! f17 dark-channel mean.

use crate::error::Result;
use crate::global::{
    brightness_entropies, colorfulness_pair, dark_channel_mean, ggd_fit, mscn, BrightnessConfig,
    GgdFit, MscnConfig,
};
use crate::image::{to_gray, PlaneF, RasterImage};
use crate::local::{contrast_energy, dwt97_3level, log_energy, CeParams};
use crate::phasecong::{build_bank, pc_entropy, pc_map, PcConfig};

/// Number of features.
pub const FEATURE_COUNT: usize = 17;

/// CSV header of the feature dump format.
pub fn feature_header() -> String {
    (1..=FEATURE_COUNT)
        .map(|i| format!("f{i:02}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// The ordered feature tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    /// Set when the GGD fit was bypassed (constant MSCN field).
    pub ggd_degenerate: bool,
    /// Set when the GGD shape hit its search bounds.
    pub ggd_clamped: bool,
}

impl FeatureVector {
    pub fn from_values(values: [f64; FEATURE_COUNT]) -> Self {
        Self {
            values,
            ggd_degenerate: false,
            ggd_clamped: false,
        }
    }

    /// One CSV row, 9 significant digits per value.
    pub fn to_csv_row(&self) -> String {
        self.values
            .iter()
            .map(|v| format_sig9(*v))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Checks the contractual ranges of each field.
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        let v = &self.values;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Malformed("non-finite feature".into()));
        }
        let in_range = |x: f64, lo: f64, hi: f64| x >= lo - 1e-9 && x <= hi + 1e-9;
        if !in_range(v[0], 0.0, 8.0) {
            return Err(Error::Malformed(format!("f01 out of range: {}", v[0])));
        }
        for (i, x) in v[6..12].iter().enumerate() {
            if !in_range(*x, 0.0, 8.0) {
                return Err(Error::Malformed(format!("f{:02} out of range: {x}", i + 7)));
            }
        }
        if !in_range(v[12], 0.0, 1.0) || !in_range(v[16], 0.0, 1.0) {
            return Err(Error::Malformed("f13/f17 out of range".into()));
        }
        if v[13] < -1e-9 {
            return Err(Error::Malformed("f14 negative".into()));
        }
        if !in_range(v[14], 0.2, 10.0) {
            return Err(Error::Malformed(format!("f15 out of range: {}", v[14])));
        }
        Ok(())
    }
}

/// 9-significant-digit scientific formatting used by every CSV surface.
pub fn format_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Extraction parameters for the three configurable feature families.
#[derive(Debug, Clone, Default)]
pub struct Extractor {
    pub pc: PcConfig,
    pub ce: CeParams,
    pub mscn: MscnConfig,
    pub brightness: BrightnessConfig,
}

impl Extractor {
    /// Phase-congruency entropy (f01).
    pub fn contrast_entropy(&self, gray: &PlaneF) -> Result<f64> {
        let bank = build_bank(&self.pc, gray.width(), gray.height())?;
        let map = pc_map(gray, &bank)?;
        pc_entropy(gray, &map)
    }

    /// Wavelet log-energies (f05, f06).
    pub fn sharpness(&self, gray: &PlaneF) -> Result<(f64, f64)> {
        Ok(log_energy(&dwt97_3level(gray)?))
    }

    /// Naturalness NSS pair (f15, f16) plus degeneracy flags.
    pub fn naturalness_nss(&self, gray: &PlaneF) -> Result<GgdFit> {
        let coeffs = mscn(gray, &self.mscn)?;
        let first = coeffs.data()[0];
        if coeffs.data().iter().all(|&v| v == first) {
            // constant field: the shape is unidentifiable, report the
            // Gaussian shape with zero energy instead of erroring
            return Ok(GgdFit {
                nu: 2.0,
                sigma2: 0.0,
                clamped: false,
            });
        }
        ggd_fit(coeffs.data())
    }

    /// Full ordered vector.
    pub fn extract(&self, img: &RasterImage) -> Result<FeatureVector> {
        img.check_feature_size()?;
        let gray = to_gray(img);

        let e_pc = self.contrast_entropy(&gray)?;
        let (ce_gr, ce_yb, ce_rg) = contrast_energy(img, &self.ce)?;
        let (le2, le3) = self.sharpness(&gray)?;
        let em = brightness_entropies(&gray, &self.brightness)?;
        let (s, c) = if img.channels() == 3 {
            colorfulness_pair(img)?
        } else {
            (0.0, 0.0)
        };
        let gray_constant = {
            let first = gray.data()[0];
            gray.data().iter().all(|&v| v == first)
        };
        let nss = if gray_constant {
            GgdFit {
                nu: 2.0,
                sigma2: 0.0,
                clamped: false,
            }
        } else {
            self.naturalness_nss(&gray)?
        };
        let s_d = if img.channels() == 3 {
            dark_channel_mean(img)?
        } else {
            gray.mean() / 255.0
        };

        Ok(FeatureVector {
            values: [
                e_pc, ce_gr, ce_yb, ce_rg, le2, le3, em[0], em[1], em[2], em[3], em[4], em[5], s,
                c, nss.nu, nss.sigma2, s_d,
            ],
            ggd_degenerate: gray_constant,
            ggd_clamped: nss.clamped,
        })
    }
}

/// Parses one feature CSV row (optionally with a trailing label column).
pub fn parse_feature_row(line: &str, expect_label: bool) -> Result<([f64; FEATURE_COUNT], Option<f64>)> {
    use crate::error::Error;
    let parts: Vec<&str> = line.split(',').collect();
    let expect = FEATURE_COUNT + usize::from(expect_label);
    if parts.len() != expect {
        return Err(Error::Malformed(format!(
            "expected {expect} columns, got {}",
            parts.len()
        )));
    }
    let mut values = [0.0f64; FEATURE_COUNT];
    for (i, p) in parts[..FEATURE_COUNT].iter().enumerate() {
        values[i] = p
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Malformed(format!("column {}: {e}", i + 1)))?;
    }
    let label = if expect_label {
        Some(
            parts[FEATURE_COUNT]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Malformed(format!("label column: {e}")))?,
        )
    } else {
        None
    };
    Ok((values, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::RasterImage;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn checkerboard(w: usize, h: usize) -> RasterImage {
        let mut data = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                let v = if ((x / 8) + (y / 8)) % 2 == 0 { 64u8 } else { 192u8 };
                data.extend([v, v, v]);
            }
        }
        RasterImage::new(w, h, 3, data).unwrap()
    }

    #[test]
    fn constant_gray_image_degenerates_cleanly() {
        let img = RasterImage::new(48, 48, 3, vec![120; 48 * 48 * 3]).unwrap();
        let fv = Extractor::default().extract(&img).unwrap();
        let v = fv.values;
        for i in [0usize, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13] {
            assert!(v[i].abs() < 1e-9, "f{:02} = {}", i + 1, v[i]);
        }
        assert_eq!(v[14], 2.0);
        assert_eq!(v[15], 0.0);
        assert!((v[16] - 120.0 / 255.0).abs() < 1e-12);
        assert!(fv.ggd_degenerate);
    }

    #[test]
    fn rejects_undersized_images() {
        let img = RasterImage::new(31, 64, 3, vec![0; 31 * 64 * 3]).unwrap();
        assert!(Extractor::default().extract(&img).is_err());
    }

    #[test]
    fn all_features_finite_and_in_contract_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let data: Vec<u8> = (0..64 * 48 * 3).map(|_| rng.gen()).collect();
        let img = RasterImage::new(64, 48, 3, data).unwrap();
        let fv = Extractor::default().extract(&img).unwrap();
        fv.validate().unwrap();
    }

    #[test]
    fn extraction_is_deterministic() {
        let img = checkerboard(64, 64);
        let ex = Extractor::default();
        let a = ex.extract(&img).unwrap();
        let b = ex.extract(&img).unwrap();
        for i in 0..FEATURE_COUNT {
            assert_eq!(a.values[i].to_bits(), b.values[i].to_bits(), "f{:02}", i + 1);
        }
    }

    #[test]
    fn pipeline_matches_per_family_calls() {
        // feature independence: the composed vector equals what the
        // individual family entry points produce
        let img = checkerboard(64, 64);
        let ex = Extractor::default();
        let fv = ex.extract(&img).unwrap();
        let gray = to_gray(&img);

        assert_eq!(fv.values[0], ex.contrast_entropy(&gray).unwrap());
        let (ce_gr, ce_yb, ce_rg) = contrast_energy(&img, &ex.ce).unwrap();
        assert_eq!((fv.values[1], fv.values[2], fv.values[3]), (ce_gr, ce_yb, ce_rg));
        let (le2, le3) = ex.sharpness(&gray).unwrap();
        assert_eq!((fv.values[4], fv.values[5]), (le2, le3));
        let em = brightness_entropies(&gray, &ex.brightness).unwrap();
        assert_eq!(&fv.values[6..12], &em[..]);
        let (s, c) = colorfulness_pair(&img).unwrap();
        assert_eq!((fv.values[12], fv.values[13]), (s, c));
        let nss = ex.naturalness_nss(&gray).unwrap();
        assert_eq!((fv.values[14], fv.values[15]), (nss.nu, nss.sigma2));
        assert_eq!(fv.values[16], dark_channel_mean(&img).unwrap());
    }

    #[test]
    fn csv_row_round_trips_at_nine_digits() {
        let img = checkerboard(64, 64);
        let fv = Extractor::default().extract(&img).unwrap();
        let row = fv.to_csv_row();
        let (values, label) = parse_feature_row(&row, false).unwrap();
        assert!(label.is_none());
        for i in 0..FEATURE_COUNT {
            let rel = (values[i] - fv.values[i]).abs() / fv.values[i].abs().max(1e-12);
            assert!(rel < 1e-8, "f{:02} rel err {rel}", i + 1);
        }
        assert_eq!(feature_header().split(',').count(), FEATURE_COUNT);
    }
}
