//! Flat `key = value` toolkit configuration with section-prefixed keys.
//! Unknown keys are rejected; the effective configuration is echoed into
//! output manifests and sidecars for provenance.

use std::collections::BTreeMap;

use crate::boiem::BoiemConfig;
use crate::cpcqi::CpcqiParams;
use crate::error::{Error, Result};
use crate::features::Extractor;
use crate::global::MscnConfig;
use crate::local::CeParams;
use crate::phasecong::PcConfig;
use crate::svr::SvrHyper;
use crate::trainset::GenConfig;

/// Every tunable of the toolkit in one document.
#[derive(Debug, Clone, Default)]
pub struct ToolkitConfig {
    pub pc: PcConfig,
    pub ce: CeParams,
    pub mscn: MscnConfig,
    pub cpcqi: CpcqiParams,
    pub svr: SvrHyper,
    pub gen: GenConfig,
    pub boiem: BoiemConfig,
}

impl ToolkitConfig {
    /// Extraction parameters bundle.
    pub fn extractor(&self) -> Extractor {
        Extractor {
            pc: self.pc.clone(),
            ce: self.ce.clone(),
            mscn: self.mscn.clone(),
            brightness: Default::default(),
        }
    }

    /// Parses a config document over the defaults. Lines are
    /// `key = value`; `#` starts a comment; unknown keys error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ToolkitConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn load_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn apply(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = lineno + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: lineno,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim(), lineno)?;
        }
        self.validate_lists()?;
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let f = || -> Result<f64> {
            value.parse::<f64>().map_err(|e| Error::Config {
                line,
                message: format!("bad number for `{key}`: {e}"),
            })
        };
        let u = || -> Result<usize> {
            value.parse::<usize>().map_err(|e| Error::Config {
                line,
                message: format!("bad integer for `{key}`: {e}"),
            })
        };
        let list = || -> Result<Vec<f64>> {
            value
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| Error::Config {
                        line,
                        message: format!("bad list entry for `{key}`: {e}"),
                    })
                })
                .collect()
        };
        let pair_list = || -> Result<Vec<(f64, f64)>> {
            value
                .split(',')
                .map(|s| {
                    let (a, b) = s.trim().split_once(':').ok_or_else(|| Error::Config {
                        line,
                        message: format!("expected `e:s` pairs for `{key}`"),
                    })?;
                    let parse = |t: &str| {
                        t.trim().parse::<f64>().map_err(|e| Error::Config {
                            line,
                            message: format!("bad pair entry for `{key}`: {e}"),
                        })
                    };
                    Ok((parse(a)?, parse(b)?))
                })
                .collect()
        };

        match key {
            "pc.scales" => self.pc.scales = u()?,
            "pc.orientations" => self.pc.orientations = u()?,
            "pc.min_wavelength" => self.pc.min_wavelength = f()?,
            "pc.multiplier" => self.pc.multiplier = f()?,
            "pc.sigma_ratio" => self.pc.sigma_ratio = f()?,
            "pc.angular_ratio" => self.pc.angular_ratio = f()?,
            "pc.noise_factor" => self.pc.noise_factor = f()?,
            "pc.cutoff" => self.pc.cutoff = f()?,
            "pc.gain" => self.pc.gain = f()?,
            "pc.epsilon" => self.pc.epsilon = f()?,
            "ce.sigma" => self.ce.gauss_sigma = f()?,
            "ce.theta" => self.ce.theta = f()?,
            "ce.phi_gr" => self.ce.phi_gr = f()?,
            "ce.phi_yb" => self.ce.phi_yb = f()?,
            "ce.phi_rg" => self.ce.phi_rg = f()?,
            "nss.window" => self.mscn.window = u()?,
            "nss.sigma" => self.mscn.sigma = f()?,
            "nss.epsilon" => self.mscn.epsilon = f()?,
            "cpcqi.patch_size" => self.cpcqi.patch_size = u()?,
            "cpcqi.stride" => self.cpcqi.stride = u()?,
            "cpcqi.c1" => self.cpcqi.c1 = f()?,
            "cpcqi.c2" => self.cpcqi.c2 = f()?,
            "cpcqi.c3" => self.cpcqi.c3 = f()?,
            "cpcqi.zeta" => self.cpcqi.zeta = f()?,
            "cpcqi.exponent" => self.cpcqi.exponent = f()?,
            "svr.t" => self.svr.t = f()?,
            "svr.p" => self.svr.p = f()?,
            "svr.k" => self.svr.k = f()?,
            "gen.per_op" => self.gen.per_op = u()?,
            "gen.gamma_min" => self.gen.gamma_min = f()?,
            "gen.gamma_max" => self.gen.gamma_max = f()?,
            "gen.scurve_min" => self.gen.scurve_min = f()?,
            "gen.scurve_max" => self.gen.scurve_max = f()?,
            "gen.shift_min" => self.gen.shift_min = f()?,
            "gen.shift_max" => self.gen.shift_max = f()?,
            "gen.arch_min" => self.gen.arch_min = f()?,
            "gen.arch_max" => self.gen.arch_max = f()?,
            "gen.he_min" => self.gen.he_min = f()?,
            "gen.he_max" => self.gen.he_max = f()?,
            "boiem.lambda_b" => self.boiem.lambda_b_candidates = list()?,
            "boiem.lambda_pairs" => self.boiem.lambda_pairs = pair_list()?,
            "boiem.rayleigh_scale" => self.boiem.rayleigh_scale = f()?,
            _ => {
                return Err(Error::UnknownConfigKey {
                    key: key.to_string(),
                    line,
                })
            }
        }
        Ok(())
    }

    fn validate_lists(&self) -> Result<()> {
        self.boiem.validate()
    }

    /// Deterministic echo of the effective configuration.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("pc.scales", self.pc.scales.to_string());
        put("pc.orientations", self.pc.orientations.to_string());
        put("pc.min_wavelength", self.pc.min_wavelength.to_string());
        put("pc.multiplier", self.pc.multiplier.to_string());
        put("pc.sigma_ratio", self.pc.sigma_ratio.to_string());
        put("pc.angular_ratio", self.pc.angular_ratio.to_string());
        put("pc.noise_factor", self.pc.noise_factor.to_string());
        put("pc.cutoff", self.pc.cutoff.to_string());
        put("pc.gain", self.pc.gain.to_string());
        put("pc.epsilon", self.pc.epsilon.to_string());
        put("ce.sigma", self.ce.gauss_sigma.to_string());
        put("ce.theta", self.ce.theta.to_string());
        put("ce.phi_gr", self.ce.phi_gr.to_string());
        put("ce.phi_yb", self.ce.phi_yb.to_string());
        put("ce.phi_rg", self.ce.phi_rg.to_string());
        put("nss.window", self.mscn.window.to_string());
        put("nss.sigma", self.mscn.sigma.to_string());
        put("nss.epsilon", self.mscn.epsilon.to_string());
        put("cpcqi.patch_size", self.cpcqi.patch_size.to_string());
        put("cpcqi.stride", self.cpcqi.stride.to_string());
        put("cpcqi.c1", self.cpcqi.c1.to_string());
        put("cpcqi.c2", self.cpcqi.c2.to_string());
        put("cpcqi.c3", self.cpcqi.c3.to_string());
        put("cpcqi.zeta", self.cpcqi.zeta.to_string());
        put("cpcqi.exponent", self.cpcqi.exponent.to_string());
        put("svr.t", self.svr.t.to_string());
        put("svr.p", self.svr.p.to_string());
        put("svr.k", self.svr.k.to_string());
        put("gen.per_op", self.gen.per_op.to_string());
        put("gen.gamma_min", self.gen.gamma_min.to_string());
        put("gen.gamma_max", self.gen.gamma_max.to_string());
        put("gen.scurve_min", self.gen.scurve_min.to_string());
        put("gen.scurve_max", self.gen.scurve_max.to_string());
        put("gen.shift_min", self.gen.shift_min.to_string());
        put("gen.shift_max", self.gen.shift_max.to_string());
        put("gen.arch_min", self.gen.arch_min.to_string());
        put("gen.arch_max", self.gen.arch_max.to_string());
        put("gen.he_min", self.gen.he_min.to_string());
        put("gen.he_max", self.gen.he_max.to_string());
        put(
            "boiem.lambda_b",
            self.boiem
                .lambda_b_candidates
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put(
            "boiem.lambda_pairs",
            self.boiem
                .lambda_pairs
                .iter()
                .map(|(e, s)| format!("{e}:{s}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        put("boiem.rayleigh_scale", self.boiem.rayleigh_scale.to_string());
        m
    }
}
