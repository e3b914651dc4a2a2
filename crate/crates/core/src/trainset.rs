//! Synthetic training-corpus generation: eight global tone-mapping
//! operators with seeded parameter draws, labeled by the full-reference
//! metric against the untouched source.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;
use std::io::{BufRead, Write};

use crate::cpcqi::{cpcqi_score, CpcqiParams};
use crate::error::{Error, Result};
use crate::features::{Extractor, FEATURE_COUNT};
use crate::image::{histogram_u8, to_gray, RasterImage};
use crate::svr::TrainSet;

/// Operator families; every operator is a monotone LUT applied
/// identically to R, G, B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    Gamma,
    InverseGamma,
    SCurve,
    InverseS,
    ConvexArch,
    ConcaveArch,
    MeanShift,
    HistEq,
}

pub const ALL_OPS: [OpKind; 8] = [
    OpKind::Gamma,
    OpKind::InverseGamma,
    OpKind::SCurve,
    OpKind::InverseS,
    OpKind::ConvexArch,
    OpKind::ConcaveArch,
    OpKind::MeanShift,
    OpKind::HistEq,
];

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Gamma => "gamma",
            OpKind::InverseGamma => "inverse-gamma",
            OpKind::SCurve => "s-curve",
            OpKind::InverseS => "inverse-s",
            OpKind::ConvexArch => "convex-arch",
            OpKind::ConcaveArch => "concave-arch",
            OpKind::MeanShift => "mean-shift",
            OpKind::HistEq => "hist-eq",
        }
    }
}

/// One drawn enhancement operator.
#[derive(Debug, Clone, Serialize)]
pub struct EnhanceOp {
    pub kind: OpKind,
    pub params: Vec<f64>,
}

/// Parameter ranges for the draws.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub per_op: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub scurve_min: f64,
    pub scurve_max: f64,
    pub shift_min: f64,
    pub shift_max: f64,
    pub arch_min: f64,
    pub arch_max: f64,
    pub he_min: f64,
    pub he_max: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            per_op: 7,
            gamma_min: 0.3,
            gamma_max: 2.5,
            scurve_min: 0.5,
            scurve_max: 3.0,
            shift_min: -60.0,
            shift_max: 60.0,
            arch_min: 0.15,
            arch_max: 0.9,
            he_min: 0.3,
            he_max: 1.0,
        }
    }
}

impl GenConfig {
    fn validate(&self) -> Result<()> {
        if self.per_op < 1 {
            return Err(Error::InvalidParameter("gen.per_op must be >= 1".into()));
        }
        let ordered = self.gamma_min < self.gamma_max
            && self.scurve_min < self.scurve_max
            && self.shift_min < self.shift_max
            && self.arch_min < self.arch_max
            && self.he_min < self.he_max;
        if !ordered || self.gamma_min <= 0.0 || self.arch_max > 1.0 {
            return Err(Error::InvalidParameter("bad generator ranges".into()));
        }
        Ok(())
    }
}

fn scurve_raw(z: f64, slope: f64) -> f64 {
    1.0 / (1.0 + (-slope * (z - 127.5) / 64.0).exp())
}

/// Builds the 256-entry LUT for an operator. The equalization operator
/// needs the source image for its histogram.
pub fn op_lut(op: &EnhanceOp, src: &RasterImage) -> [u8; 256] {
    let mut lut = [0u8; 256];
    let fill = |lut: &mut [u8; 256], f: &dyn Fn(f64) -> f64| {
        for (z, e) in lut.iter_mut().enumerate() {
            *e = f(z as f64).round().clamp(0.0, 255.0) as u8;
        }
    };
    match op.kind {
        OpKind::Gamma | OpKind::InverseGamma => {
            let g = op.params[0];
            fill(&mut lut, &|z| 255.0 * (z / 255.0).powf(g));
        }
        OpKind::SCurve => {
            let a = op.params[0];
            let q0 = scurve_raw(0.0, a);
            let q1 = scurve_raw(255.0, a);
            fill(&mut lut, &|z| {
                255.0 * (scurve_raw(z, a) - q0) / (q1 - q0)
            });
        }
        OpKind::InverseS => {
            let a = op.params[0];
            let q0 = scurve_raw(0.0, a);
            let q1 = scurve_raw(255.0, a);
            fill(&mut lut, &|z| {
                let q = q0 + (z / 255.0) * (q1 - q0);
                127.5 + (64.0 / a) * (q / (1.0 - q)).ln()
            });
        }
        OpKind::ConvexArch | OpKind::ConcaveArch => {
            let a = if op.kind == OpKind::ConvexArch {
                op.params[0]
            } else {
                -op.params[0]
            };
            fill(&mut lut, &|z| {
                let x = z / 255.0;
                255.0 * (x + a * x * (1.0 - x))
            });
        }
        OpKind::MeanShift => {
            let d = op.params[0];
            fill(&mut lut, &|z| z + d);
        }
        OpKind::HistEq => {
            let beta = op.params[0];
            let gray = to_gray(src);
            let levels: Vec<u8> = gray
                .data()
                .iter()
                .map(|&v| v.round().clamp(0.0, 255.0) as u8)
                .collect();
            let h = histogram_u8(&levels, true).expect("non-empty image");
            let mut cdf = [0.0f64; 256];
            let mut acc = 0.0;
            for (i, &b) in h.bins.iter().enumerate() {
                acc += b;
                cdf[i] = acc;
            }
            for (z, e) in lut.iter_mut().enumerate() {
                let prev = if z == 0 { 0.0 } else { cdf[z - 1] };
                let he = 255.0 * 0.5 * (prev + cdf[z]);
                *e = ((1.0 - beta) * z as f64 + beta * he)
                    .round()
                    .clamp(0.0, 255.0) as u8;
            }
        }
    }
    lut
}

/// Applies a LUT identically to every channel.
pub fn apply_op(src: &RasterImage, op: &EnhanceOp) -> RasterImage {
    let lut = op_lut(op, src);
    RasterImage::new(
        src.width(),
        src.height(),
        src.channels(),
        src.data().iter().map(|&v| lut[v as usize]).collect(),
    )
    .expect("dimensions preserved")
}

fn draw_op(kind: OpKind, cfg: &GenConfig, rng: &mut ChaCha8Rng) -> EnhanceOp {
    let p = match kind {
        OpKind::Gamma => rng.gen_range(1.0..=cfg.gamma_max),
        OpKind::InverseGamma => rng.gen_range(cfg.gamma_min..=1.0),
        OpKind::SCurve | OpKind::InverseS => rng.gen_range(cfg.scurve_min..=cfg.scurve_max),
        OpKind::ConvexArch | OpKind::ConcaveArch => rng.gen_range(cfg.arch_min..=cfg.arch_max),
        OpKind::MeanShift => rng.gen_range(cfg.shift_min..=cfg.shift_max),
        OpKind::HistEq => rng.gen_range(cfg.he_min..=cfg.he_max),
    };
    EnhanceOp {
        kind,
        params: vec![p],
    }
}

/// Draws `per_op` parameterizations of each of the eight operators and
/// applies them; deterministic for a given seed. Row order is
/// (operator index, draw index).
pub fn generate_variants(
    src: &RasterImage,
    cfg: &GenConfig,
    seed: u64,
) -> Result<Vec<(RasterImage, EnhanceOp)>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops = Vec::with_capacity(8 * cfg.per_op);
    for kind in ALL_OPS {
        for _ in 0..cfg.per_op {
            ops.push(draw_op(kind, cfg, &mut rng));
        }
    }
    Ok(ops
        .into_par_iter()
        .map(|op| (apply_op(src, &op), op))
        .collect())
}

/// One labeled corpus row.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusRow {
    pub source: String,
    pub op: String,
    pub params: Vec<f64>,
    #[serde(skip)]
    pub features: [f64; FEATURE_COUNT],
    pub label: f64,
}

/// Corpus build output: ordered rows plus source content hashes.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub rows: Vec<CorpusRow>,
    /// (source path, content hash) in input order.
    pub source_hashes: Vec<(String, String)>,
}

impl Corpus {
    pub fn train_set(&self) -> TrainSet {
        let mut set = TrainSet::default();
        for row in &self.rows {
            set.push(row.features, row.label);
        }
        set
    }
}

/// Extracts features and labels one variant against its reference.
pub fn label_row(
    reference: &RasterImage,
    variant: &RasterImage,
    extractor: &Extractor,
    metric: &CpcqiParams,
) -> Result<([f64; FEATURE_COUNT], f64)> {
    let fv = extractor.extract(variant)?;
    let label = cpcqi_score(reference, variant, metric)?;
    Ok((fv.values, label))
}

/// Builds the labeled corpus for a set of sources: per source one
/// reference row (label 1 by construction) followed by the variant rows.
/// Rows are ordered by (source index, operator index, draw index).
pub fn build_corpus(
    sources: &[(String, RasterImage)],
    cfg: &GenConfig,
    extractor: &Extractor,
    metric: &CpcqiParams,
    seed: u64,
) -> Result<Corpus> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut source_hashes = Vec::new();
    for (index, (path, src)) in sources.iter().enumerate() {
        source_hashes.push((path.clone(), src.content_hash()));
        let variants = generate_variants(src, cfg, seed.wrapping_add(index as u64))?;

        let (ref_features, ref_label) = label_row(src, src, extractor, metric)?;
        rows.push(CorpusRow {
            source: path.clone(),
            op: "reference".into(),
            params: Vec::new(),
            features: ref_features,
            label: ref_label,
        });

        let labeled: Vec<Result<CorpusRow>> = variants
            .par_iter()
            .map(|(img, op)| {
                let (features, label) = label_row(src, img, extractor, metric)?;
                Ok(CorpusRow {
                    source: path.clone(),
                    op: op.kind.name().into(),
                    params: op.params.clone(),
                    features,
                    label,
                })
            })
            .collect();
        for r in labeled {
            rows.push(r?);
        }
    }
    Ok(Corpus { rows, source_hashes })
}

/// Writes the JSON-lines manifest: a config-echo line followed by one
/// line per row carrying the source path, source content hash, operator,
/// parameters, and label.
pub fn write_manifest<W: Write>(
    corpus: &Corpus,
    config_echo: &std::collections::BTreeMap<String, String>,
    out: &mut W,
) -> Result<()> {
    let hash_of: std::collections::HashMap<&str, &str> = corpus
        .source_hashes
        .iter()
        .map(|(p, h)| (p.as_str(), h.as_str()))
        .collect();
    let header = serde_json::json!({ "config": config_echo });
    writeln!(out, "{header}")?;
    for row in &corpus.rows {
        let line = serde_json::json!({
            "source": row.source,
            "source_sha256": hash_of.get(row.source.as_str()).copied().unwrap_or(""),
            "op": row.op,
            "params": row.params,
            "label": row.label,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Collects the source content hashes recorded in a manifest.
pub fn read_manifest_hashes<R: BufRead>(reader: R) -> Result<HashSet<String>> {
    let mut hashes = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::Malformed(format!("bad manifest line: {e}")))?;
        if let Some(h) = value.get("source_sha256").and_then(|v| v.as_str()) {
            if !h.is_empty() {
                hashes.insert(h.to_string());
            }
        }
    }
    Ok(hashes)
}
