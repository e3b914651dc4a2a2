//! Epsilon-SVR with an RBF kernel: SMO dual solver, prediction, grid
//! search, and a versioned plain-text model format.
//!
//! The dual is solved over the stacked 2r-variable formulation with
//! working-set selection by maximal KKT violation. Features are min-max
//! scaled to [0, 1] from the training set; the scaling is stored in the
//! model so prediction is self-contained.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{feature_header, format_sig9, parse_feature_row, FEATURE_COUNT};

/// Box constraint t, tube half-width p, RBF width k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrHyper {
    pub t: f64,
    pub p: f64,
    pub k: f64,
}

impl Default for SvrHyper {
    fn default() -> Self {
        Self {
            t: 256.0,
            p: 0.01,
            k: 1.0 / FEATURE_COUNT as f64,
        }
    }
}

impl SvrHyper {
    fn validate(&self) -> Result<()> {
        if self.t <= 0.0 || self.p <= 0.0 || self.k <= 0.0 {
            return Err(Error::InvalidParameter(
                "svr hyperparameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Minimum number of rows accepted for training.
pub const MIN_TRAIN_ROWS: usize = 50;

/// Default KKT stopping tolerance.
pub const DEFAULT_KKT_TOL: f64 = 1e-3;

/// Default cap on SMO pair updates.
pub const DEFAULT_MAX_UPDATES: u64 = 10_000_000;

/// Feature rows with target labels.
#[derive(Debug, Clone, Default)]
pub struct TrainSet {
    pub features: Vec<[f64; FEATURE_COUNT]>,
    pub labels: Vec<f64>,
}

impl TrainSet {
    pub fn new(features: Vec<[f64; FEATURE_COUNT]>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Malformed("feature/label count mismatch".into()));
        }
        if labels.iter().any(|l| !l.is_finite()) {
            return Err(Error::Malformed("non-finite label".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, features: [f64; FEATURE_COUNT], label: f64) {
        self.features.push(features);
        self.labels.push(label);
    }

    pub fn subset(&self, indices: &[usize]) -> TrainSet {
        TrainSet {
            features: indices.iter().map(|&i| self.features[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// SHA-256 over the full-precision canonical row serialization.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (f, l) in self.features.iter().zip(&self.labels) {
            for v in f {
                h.update(v.to_le_bytes());
            }
            h.update(l.to_le_bytes());
        }
        let d = h.finalize();
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes `f01..f17,label` rows at 9 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{},label", feature_header())?;
        for (f, l) in self.features.iter().zip(&self.labels) {
            let row: Vec<String> = f.iter().map(|v| format_sig9(*v)).collect();
            writeln!(out, "{},{}", row.join(","), format_sig9(*l))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Malformed("empty training CSV".into()))??;
        let expect = format!("{},label", feature_header());
        if header.trim() != expect {
            return Err(Error::Malformed(format!(
                "bad training CSV header: {header}"
            )));
        }
        let mut set = TrainSet::default();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (values, label) = parse_feature_row(&line, true)?;
            set.push(values, label.unwrap());
        }
        Ok(set)
    }
}

/// Per-feature min-max scaling; constant features map to 0.
fn fit_scaling(features: &[[f64; FEATURE_COUNT]]) -> ([f64; FEATURE_COUNT], [f64; FEATURE_COUNT]) {
    let mut lo = [f64::INFINITY; FEATURE_COUNT];
    let mut hi = [f64::NEG_INFINITY; FEATURE_COUNT];
    for row in features {
        for i in 0..FEATURE_COUNT {
            lo[i] = lo[i].min(row[i]);
            hi[i] = hi[i].max(row[i]);
        }
    }
    (lo, hi)
}

fn apply_scaling(
    x: &[f64; FEATURE_COUNT],
    lo: &[f64; FEATURE_COUNT],
    hi: &[f64; FEATURE_COUNT],
) -> [f64; FEATURE_COUNT] {
    let mut out = [0.0f64; FEATURE_COUNT];
    for i in 0..FEATURE_COUNT {
        out[i] = if hi[i] > lo[i] {
            ((x[i] - lo[i]) / (hi[i] - lo[i])).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
    out
}

fn rbf(a: &[f64; FEATURE_COUNT], b: &[f64; FEATURE_COUNT], gamma: f64) -> f64 {
    let mut d2 = 0.0;
    for i in 0..FEATURE_COUNT {
        let d = a[i] - b[i];
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

/// Trained model: normalized support vectors, signed dual coefficients,
/// bias, RBF width, and the feature scaling.
#[derive(Debug, Clone)]
pub struct SvrModel {
    pub gamma: f64,
    pub bias: f64,
    pub norm_lo: [f64; FEATURE_COUNT],
    pub norm_hi: [f64; FEATURE_COUNT],
    pub support_vectors: Vec<[f64; FEATURE_COUNT]>,
    pub dual_coefs: Vec<f64>,
    /// Training-set fingerprint.
    pub meta: String,
}

impl SvrModel {
    pub fn sv_count(&self) -> usize {
        self.support_vectors.len()
    }

    /// Kernel expansion over the normalized input plus bias.
    pub fn predict(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        let xn = apply_scaling(x, &self.norm_lo, &self.norm_hi);
        let mut acc = self.bias;
        for (sv, coef) in self.support_vectors.iter().zip(&self.dual_coefs) {
            acc += coef * rbf(&xn, sv, self.gamma);
        }
        acc
    }
}

/// Training result: the model plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SvrModel,
    /// Maximum KKT violation over the training rows.
    pub kkt_residual: f64,
    pub pair_updates: u64,
    /// Largest |prediction - label| over the training rows.
    pub max_self_error: f64,
}

/// Trains with the default tolerance and iteration cap.
pub fn train(data: &TrainSet, hyper: &SvrHyper) -> Result<TrainOutcome> {
    train_with_tolerance(data, hyper, DEFAULT_KKT_TOL, DEFAULT_MAX_UPDATES)
}

/// SMO over the 2r-variable dual; stops when the maximal KKT violation
/// drops to `tol`, errs with the remaining gap when the update cap hits.
pub fn train_with_tolerance(
    data: &TrainSet,
    hyper: &SvrHyper,
    tol: f64,
    max_updates: u64,
) -> Result<TrainOutcome> {
    hyper.validate()?;
    let n = data.len();
    if n < MIN_TRAIN_ROWS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_TRAIN_ROWS} training rows, got {n}"
        )));
    }
    let (lo, hi) = fit_scaling(&data.features);
    let scaled: Vec<[f64; FEATURE_COUNT]> = data
        .features
        .iter()
        .map(|x| apply_scaling(x, &lo, &hi))
        .collect();
    let y = &data.labels;
    let c = hyper.t;
    let p = hyper.p;

    // full kernel matrix
    let mut kernel = vec![0.0f64; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(&scaled[i], &scaled[j], hyper.k);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    let kval = |i: usize, j: usize| kernel[i * n + j];

    // stacked variables: t < n has sign +1, t >= n has sign -1
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let row = |t: usize| if t < n { t } else { t - n };
    let mut alpha = vec![0.0f64; 2 * n];
    let mut grad = vec![0.0f64; 2 * n];
    for t in 0..2 * n {
        grad[t] = p - sign(t) * y[row(t)];
    }

    let mut updates: u64 = 0;
    let (final_m, final_mm) = loop {
        // working-set selection by maximal violation
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = usize::MAX;
        let mut mm_val = f64::INFINITY;
        let mut mm_idx = usize::MAX;
        for t in 0..2 * n {
            let s = sign(t);
            let v = -s * grad[t];
            let in_up = (s > 0.0 && alpha[t] < c) || (s < 0.0 && alpha[t] > 0.0);
            let in_low = (s > 0.0 && alpha[t] > 0.0) || (s < 0.0 && alpha[t] < c);
            if in_up && v > m_val {
                m_val = v;
                m_idx = t;
            }
            if in_low && v < mm_val {
                mm_val = v;
                mm_idx = t;
            }
        }
        if m_val - mm_val <= tol {
            break (m_val, mm_val);
        }
        if updates >= max_updates {
            return Err(Error::NonConvergence {
                gap: m_val - mm_val,
            });
        }
        updates += 1;

        let (i, j) = (m_idx, mm_idx);
        let (si, sj) = (sign(i), sign(j));
        let (ri, rj) = (row(i), row(j));
        let sgn = si * sj;
        let quad = (kval(ri, ri) + kval(rj, rj) - 2.0 * kval(ri, rj)).max(1e-12);
        let mut d = -(grad[i] - sgn * grad[j]) / quad;
        // box clipping for alpha_i and the coupled alpha_j move
        d = d.clamp(-alpha[i], c - alpha[i]);
        if sgn > 0.0 {
            d = d.clamp(alpha[j] - c, alpha[j]);
        } else {
            d = d.clamp(-alpha[j], c - alpha[j]);
        }
        if d == 0.0 {
            // numerically stuck pair; the gap cannot be reduced further
            break (m_val, mm_val);
        }
        alpha[i] += d;
        alpha[j] -= sgn * d;
        let (di, dj) = (d, -sgn * d);
        for t in 0..2 * n {
            let st = sign(t);
            let rt = row(t);
            grad[t] += st * (si * kval(rt, ri) * di + sj * kval(rt, rj) * dj);
        }
    };

    let bias = 0.5 * (final_m + final_mm);
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    let mut beta_full = vec![0.0f64; n];
    for i in 0..n {
        let beta = alpha[i] - alpha[i + n];
        beta_full[i] = beta;
        if beta.abs() > 1e-12 {
            support_vectors.push(scaled[i]);
            dual_coefs.push(beta);
        }
    }

    let model = SvrModel {
        gamma: hyper.k,
        bias,
        norm_lo: lo,
        norm_hi: hi,
        support_vectors,
        dual_coefs,
        meta: data.fingerprint(),
    };

    // diagnostics on the training rows
    let mut kkt = 0.0f64;
    let mut max_self = 0.0f64;
    let bound_tol = 1e-9 * c;
    for i in 0..n {
        let mut g = bias;
        for (j, b) in beta_full.iter().enumerate() {
            if *b != 0.0 {
                g += b * kval(i, j);
            }
        }
        let r = g - y[i];
        max_self = max_self.max(r.abs());
        let beta = beta_full[i];
        let viol = if beta.abs() <= 1e-12 {
            (r.abs() - p).max(0.0)
        } else if beta >= c - bound_tol {
            (r + p).max(0.0)
        } else if beta > 0.0 {
            (r + p).abs()
        } else if beta <= -c + bound_tol {
            (p - r).max(0.0)
        } else {
            (r - p).abs()
        };
        kkt = kkt.max(viol);
    }

    Ok(TrainOutcome {
        model,
        kkt_residual: kkt,
        pair_updates: updates,
        max_self_error: max_self,
    })
}

/// Cross-validation grid.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub t: Vec<f64>,
    pub k: Vec<f64>,
    pub p: Vec<f64>,
    pub folds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t: vec![1.0, 16.0, 256.0, 4096.0],
            k: (-6..=2).map(|e| 2.0f64.powi(e)).collect(),
            p: vec![0.005, 0.01, 0.05],
            folds: 5,
        }
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub hyper: SvrHyper,
    pub cv_rmse: f64,
}

/// K-fold cross-validation over the grid; fold assignment is a seeded
/// shuffle, the selected cell is the minimal CV RMSE (ties to the
/// earliest cell in t-major, k-then-p order).
pub fn grid_search(data: &TrainSet, spec: &GridSpec, seed: u64) -> Result<(SvrHyper, Vec<GridCell>)> {
    if spec.folds < 2 {
        return Err(Error::InvalidParameter("need at least 2 folds".into()));
    }
    if data.len() < spec.folds * 2 {
        return Err(Error::InvalidParameter("too few rows for CV".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let fold_of: Vec<usize> = {
        let mut f = vec![0usize; data.len()];
        for (pos, &idx) in order.iter().enumerate() {
            f[idx] = pos % spec.folds;
        }
        f
    };

    let mut cells = Vec::new();
    for &t in &spec.t {
        for &k in &spec.k {
            for &p in &spec.p {
                cells.push(SvrHyper { t, p, k });
            }
        }
    }

    let table: Vec<GridCell> = cells
        .par_iter()
        .map(|hyper| {
            let mut sq_sum = 0.0f64;
            let mut count = 0usize;
            for fold in 0..spec.folds {
                let train_idx: Vec<usize> =
                    (0..data.len()).filter(|i| fold_of[*i] != fold).collect();
                let test_idx: Vec<usize> =
                    (0..data.len()).filter(|i| fold_of[*i] == fold).collect();
                if test_idx.is_empty() {
                    continue;
                }
                let sub = data.subset(&train_idx);
                match train(&sub, hyper) {
                    Ok(out) => {
                        for &i in &test_idx {
                            let e = out.model.predict(&data.features[i]) - data.labels[i];
                            sq_sum += e * e;
                        }
                        count += test_idx.len();
                    }
                    Err(_) => {
                        return GridCell {
                            hyper: *hyper,
                            cv_rmse: f64::INFINITY,
                        }
                    }
                }
            }
            GridCell {
                hyper: *hyper,
                cv_rmse: (sq_sum / count.max(1) as f64).sqrt(),
            }
        })
        .collect();

    let mut best = 0usize;
    for (i, cell) in table.iter().enumerate() {
        if cell.cv_rmse < table[best].cv_rmse {
            best = i;
        }
    }
    Ok((table[best].hyper, table))
}

const MODEL_MAGIC: &str = "BIQME-SVR v1";

impl SvrModel {
    /// Serializes to the versioned line-oriented text format at full
    /// decimal precision (round-trips bit-exactly).
    pub fn save_to_string(&self) -> String {
        let mut s = String::new();
        s.push_str(MODEL_MAGIC);
        s.push('\n');
        s.push_str(&format!("gamma {}\n", self.gamma));
        s.push_str(&format!("bias {}\n", self.bias));
        s.push_str(&format!("features {FEATURE_COUNT}\n"));
        let join = |a: &[f64]| {
            a.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        s.push_str(&format!("norm_lo {}\n", join(&self.norm_lo)));
        s.push_str(&format!("norm_hi {}\n", join(&self.norm_hi)));
        s.push_str(&format!("meta {}\n", if self.meta.is_empty() { "-" } else { &self.meta }));
        s.push_str(&format!("sv_count {}\n", self.support_vectors.len()));
        for (sv, coef) in self.support_vectors.iter().zip(&self.dual_coefs) {
            s.push_str(&format!("sv {} {}\n", coef, join(sv)));
        }
        s.push_str("end\n");
        s
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.save_to_string())?;
        Ok(())
    }

    pub fn load_from_str(text: &str) -> Result<Self> {
        let mut offset = 0usize;
        let fail = |offset: usize, message: &str| Error::ModelParse {
            offset,
            message: message.into(),
        };
        let mut lines = Vec::new();
        for line in text.split_inclusive('\n') {
            lines.push((offset, line.trim_end_matches('\n')));
            offset += line.len();
        }
        let mut it = lines.into_iter();
        let (off, magic) = it.next().ok_or_else(|| fail(0, "empty file"))?;
        if magic != MODEL_MAGIC {
            if magic.starts_with("BIQME-SVR") {
                return Err(Error::UnsupportedVersion {
                    found: magic.to_string(),
                });
            }
            return Err(fail(off, "missing BIQME-SVR header"));
        }

        let mut next_field = |name: &str| -> Result<(usize, String)> {
            let (off, line) = it
                .next()
                .ok_or_else(|| fail(text.len(), "unexpected end of file"))?;
            let rest = line
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| fail(off, &format!("expected `{name}` line")))?;
            Ok((off, rest.to_string()))
        };
        let parse_f64 = |off: usize, s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| fail(off, &format!("bad number `{s}`: {e}")))
        };
        let parse_vec = |off: usize, s: &str| -> Result<[f64; FEATURE_COUNT]> {
            let parts: Vec<&str> = s.split_whitespace().collect();
            if parts.len() != FEATURE_COUNT {
                return Err(fail(off, &format!("expected {FEATURE_COUNT} numbers")));
            }
            let mut out = [0.0f64; FEATURE_COUNT];
            for (i, p) in parts.iter().enumerate() {
                out[i] = parse_f64(off, p)?;
            }
            Ok(out)
        };

        let (off, g) = next_field("gamma")?;
        let gamma = parse_f64(off, &g)?;
        let (off, b) = next_field("bias")?;
        let bias = parse_f64(off, &b)?;
        let (off, fc) = next_field("features")?;
        if fc.trim() != FEATURE_COUNT.to_string() {
            return Err(fail(off, "unexpected feature count"));
        }
        let (off, lo_s) = next_field("norm_lo")?;
        let norm_lo = parse_vec(off, &lo_s)?;
        let (off, hi_s) = next_field("norm_hi")?;
        let norm_hi = parse_vec(off, &hi_s)?;
        let (_, meta) = next_field("meta")?;
        let (off, count_s) = next_field("sv_count")?;
        let count: usize = count_s
            .trim()
            .parse()
            .map_err(|_| fail(off, "bad sv_count"))?;

        let mut support_vectors = Vec::with_capacity(count);
        let mut dual_coefs = Vec::with_capacity(count);
        for _ in 0..count {
            let (off, body) = next_field("sv")?;
            let mut parts = body.splitn(2, ' ');
            let coef = parse_f64(off, parts.next().unwrap_or(""))?;
            let rest = parts
                .next()
                .ok_or_else(|| fail(off, "sv line missing vector"))?;
            dual_coefs.push(coef);
            support_vectors.push(parse_vec(off, rest)?);
        }
        let (off, last) = it
            .next()
            .ok_or_else(|| fail(text.len(), "missing end marker (truncated file)"))?;
        if last.trim() != "end" {
            return Err(fail(off, "missing end marker"));
        }
        Ok(SvrModel {
            gamma,
            bias,
            norm_lo,
            norm_hi,
            support_vectors,
            dual_coefs,
            meta: if meta == "-" { String::new() } else { meta },
        })
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::load_from_str(&text)
    }
}
