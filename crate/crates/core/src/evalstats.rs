//! Correlation benchmarking: Pearson after a five-parameter logistic
//! regression, Spearman with average ranks, and Kendall tau-b.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Objective scores paired with subjective (MOS) ratings.
#[derive(Debug, Clone)]
pub struct ScorePairs {
    pub objective: Vec<f64>,
    pub subjective: Vec<f64>,
}

/// Fits with fewer pairs than this are flagged low-confidence.
pub const LOW_CONFIDENCE_N: usize = 20;

impl ScorePairs {
    pub fn new(objective: Vec<f64>, subjective: Vec<f64>) -> Result<Self> {
        if objective.len() != subjective.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} objective vs {} subjective scores",
                objective.len(),
                subjective.len()
            )));
        }
        if objective.len() < 4 {
            return Err(Error::InvalidParameter(
                "need at least 4 score pairs".into(),
            ));
        }
        if objective
            .iter()
            .chain(subjective.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Malformed("non-finite score".into()));
        }
        Ok(Self {
            objective,
            subjective,
        })
    }

    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }

    pub fn low_confidence(&self) -> bool {
        self.len() < LOW_CONFIDENCE_N
    }
}

/// g(q) = tau1 (0.5 - 1 / (1 + exp(tau2 (q - tau3)))) + tau4 q + tau5.
pub fn logistic5(q: f64, tau: &[f64; 5]) -> f64 {
    tau[0] * (0.5 - 1.0 / (1.0 + (tau[1] * (q - tau[2])).exp())) + tau[3] * q + tau[4]
}

/// Fitted logistic mapping.
#[derive(Debug, Clone, Serialize)]
pub struct LogisticFit {
    pub tau: [f64; 5],
    pub rmse: f64,
    /// Set when the objective scores were constant and the fit fell back
    /// to a linear (tau1 = 0) model.
    pub degenerate: bool,
}

impl LogisticFit {
    pub fn map(&self, q: f64) -> f64 {
        logistic5(q, &self.tau)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_pop(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Ordinary least squares of y on x; returns (slope, intercept).
fn ols_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        (0.0, my)
    } else {
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    }
}

/// For fixed (tau2, tau3) the remaining parameters are linear; solve the
/// 3x3 normal equations for (tau1, tau4, tau5) and return the RMSE.
fn profiled_rmse(q: &[f64], mos: &[f64], tau2: f64, tau3: f64) -> (f64, [f64; 5]) {
    let n = q.len();
    let basis: Vec<[f64; 3]> = q
        .iter()
        .map(|&v| {
            let s = 0.5 - 1.0 / (1.0 + (tau2 * (v - tau3)).exp());
            [s, v, 1.0]
        })
        .collect();
    // normal equations with a tiny ridge for near-collinear bases
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (row, &y) in basis.iter().zip(mos) {
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    let ridge = 1e-12 * (ata[0][0] + ata[1][1] + ata[2][2]).max(1e-30);
    for (i, row) in ata.iter_mut().enumerate() {
        row[i] += ridge;
    }
    // Gaussian elimination
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&ata[i]);
        m[i][3] = atb[i];
    }
    for col in 0..3 {
        let mut piv = col;
        for r in col + 1..3 {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        m.swap(col, piv);
        if m[col][col] == 0.0 {
            continue;
        }
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..3)
        .map(|i| {
            if m[i][i] != 0.0 {
                m[i][3] / m[i][i]
            } else {
                0.0
            }
        })
        .collect();
    let tau = [coef[0], tau2, tau3, coef[1], coef[2]];
    let mut sq = 0.0;
    for (&v, &y) in q.iter().zip(mos) {
        let e = logistic5(v, &tau) - y;
        sq += e * e;
    }
    ((sq / n as f64).sqrt(), tau)
}

/// Nelder-Mead over (tau2, tau3) with the linear parameters profiled out.
fn nelder_mead_2d(
    q: &[f64],
    mos: &[f64],
    start: (f64, f64),
    scale: (f64, f64),
    max_evals: usize,
) -> (f64, [f64; 5]) {
    let eval = |p: [f64; 2]| profiled_rmse(q, mos, p[0], p[1]);

    let mut simplex = [
        [start.0, start.1],
        [start.0 + scale.0, start.1],
        [start.0, start.1 + scale.1],
    ];
    let mut values: Vec<(f64, [f64; 5])> = simplex.iter().map(|p| eval(*p)).collect();
    let mut best = *values
        .iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .unwrap();
    let mut evals = 3usize;

    while evals < max_evals {
        // order ascending by rmse
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| values[a].0.partial_cmp(&values[b].0).unwrap());
        let (b, s, w) = (idx[0], idx[1], idx[2]);
        if (values[w].0 - values[b].0).abs() <= 1e-15 * values[b].0.max(1e-30) {
            break;
        }
        let centroid = [
            0.5 * (simplex[b][0] + simplex[s][0]),
            0.5 * (simplex[b][1] + simplex[s][1]),
        ];
        let reflect = [
            centroid[0] + (centroid[0] - simplex[w][0]),
            centroid[1] + (centroid[1] - simplex[w][1]),
        ];
        let fr = eval(reflect);
        evals += 1;
        if fr.0 < values[b].0 {
            let expand = [
                centroid[0] + 2.0 * (centroid[0] - simplex[w][0]),
                centroid[1] + 2.0 * (centroid[1] - simplex[w][1]),
            ];
            let fe = eval(expand);
            evals += 1;
            if fe.0 < fr.0 {
                simplex[w] = expand;
                values[w] = fe;
            } else {
                simplex[w] = reflect;
                values[w] = fr;
            }
        } else if fr.0 < values[s].0 {
            simplex[w] = reflect;
            values[w] = fr;
        } else {
            let contract = [
                centroid[0] + 0.5 * (simplex[w][0] - centroid[0]),
                centroid[1] + 0.5 * (simplex[w][1] - centroid[1]),
            ];
            let fc = eval(contract);
            evals += 1;
            if fc.0 < values[w].0 {
                simplex[w] = contract;
                values[w] = fc;
            } else {
                // shrink toward the best vertex
                for i in 0..3 {
                    if i != b {
                        simplex[i] = [
                            simplex[b][0] + 0.5 * (simplex[i][0] - simplex[b][0]),
                            simplex[b][1] + 0.5 * (simplex[i][1] - simplex[b][1]),
                        ];
                        values[i] = eval(simplex[i]);
                        evals += 1;
                    }
                }
            }
        }
        for v in &values {
            if v.0 < best.0 {
                best = *v;
            }
        }
    }
    best
}

/// Least-squares fit of the five-parameter logistic by Nelder-Mead with
/// 20 restarts (the first from the documented initialization, the rest
/// with seeded jitter on tau2 and tau3); best RMSE wins, ties broken by
/// restart index.
pub fn fit_logistic5(pairs: &ScorePairs, seed: u64) -> Result<LogisticFit> {
    let q = &pairs.objective;
    let mos = &pairs.subjective;
    let sq = std_pop(q);
    if sq == 0.0 {
        // constant objective: linear fallback (tau1 = 0)
        let (slope, intercept) = ols_line(q, mos);
        let tau = [0.0, 1.0, 0.0, slope, intercept];
        let mut acc = 0.0;
        for (&v, &y) in q.iter().zip(mos) {
            let e = logistic5(v, &tau) - y;
            acc += e * e;
        }
        return Ok(LogisticFit {
            tau,
            rmse: (acc / q.len() as f64).sqrt(),
            degenerate: true,
        });
    }

    let tau2_init = 1.0 / sq;
    let tau3_init = median(q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, [f64; 5])> = None;
    for restart in 0..20 {
        let (t2, t3) = if restart == 0 {
            (tau2_init, tau3_init)
        } else {
            let u: f64 = rng.gen_range(-2.0..2.0);
            let v: f64 = rng.gen_range(-1.0..1.0);
            (tau2_init * u.exp(), tau3_init + v * sq)
        };
        let found = nelder_mead_2d(q, mos, (t2, t3), (0.5 * t2.abs().max(1e-6), 0.5 * sq), 400);
        let better = match &best {
            None => true,
            Some((rmse, _)) => found.0 < *rmse,
        };
        if better {
            best = Some(found);
        }
    }
    let (rmse, tau) = best.unwrap();
    Ok(LogisticFit {
        tau,
        rmse,
        degenerate: false,
    })
}

/// Correlation value with a degeneracy flag (zero-variance inputs
/// report 0 and set the flag).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Corr {
    pub value: f64,
    pub flagged: bool,
}

fn pearson(a: &[f64], b: &[f64]) -> Corr {
    let (ma, mb) = (mean(a), mean(b));
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (x, y) in a.iter().zip(b) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        Corr {
            value: 0.0,
            flagged: true,
        }
    } else {
        Corr {
            value: sab / (saa.sqrt() * sbb.sqrt()),
            flagged: false,
        }
    }
}

/// Pearson correlation between the logistic-mapped objective scores
/// and the subjective ratings.
pub fn plc(pairs: &ScorePairs, fit: &LogisticFit) -> Corr {
    let g: Vec<f64> = pairs.objective.iter().map(|&q| fit.map(q)).collect();
    pearson(&g, &pairs.subjective)
}

/// Average ranks with ties sharing the mean rank.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (average ranks for ties).
pub fn srocc(pairs: &ScorePairs) -> Corr {
    pearson(
        &average_ranks(&pairs.objective),
        &average_ranks(&pairs.subjective),
    )
}

fn merge_count_inversions(y: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = y.len();
    if n <= 1 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (left, right) = y.split_at_mut(mid);
        merge_count_inversions(left, buf) + merge_count_inversions(right, buf)
    };
    let (mut i, mut j, mut k) = (0usize, mid, 0usize);
    while i < mid && j < n {
        if y[i] <= y[j] {
            buf[k] = y[i];
            i += 1;
        } else {
            buf[k] = y[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = y[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = y[j];
        j += 1;
        k += 1;
    }
    y.copy_from_slice(&buf[..n]);
    inv
}

fn tie_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as u64;
        total += t * (t - 1) / 2;
        i = j + 1;
    }
    total
}

/// Kendall tau-b via Knight's O(n log n) algorithm.
pub fn krcc(pairs: &ScorePairs) -> Corr {
    let n = pairs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        pairs.objective[a]
            .partial_cmp(&pairs.objective[b])
            .unwrap()
            .then(pairs.subjective[a].partial_cmp(&pairs.subjective[b]).unwrap())
    });
    let x_sorted: Vec<f64> = order.iter().map(|&i| pairs.objective[i]).collect();
    let y_by_x: Vec<f64> = order.iter().map(|&i| pairs.subjective[i]).collect();

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tie_pairs(&x_sorted);
    // joint ties (same x and y)
    let mut n3 = 0u64;
    {
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && x_sorted[j + 1] == x_sorted[i] && y_by_x[j + 1] == y_by_x[i] {
                j += 1;
            }
            let t = (j - i + 1) as u64;
            n3 += t * (t - 1) / 2;
            i = j + 1;
        }
    }
    let mut y_for_sort = y_by_x.clone();
    let mut buf = vec![0.0f64; n];
    let inversions = merge_count_inversions(&mut y_for_sort, &mut buf);
    let n2 = tie_pairs(&y_for_sort);

    let denom = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if denom <= 0.0 {
        return Corr {
            value: 0.0,
            flagged: true,
        };
    }
    // concordant minus discordant over pairs not tied in x:
    // n0 - n1 - n2 + n3 counts pairs untied in both plus joint ties
    // already excluded; inversions among y (with x-ties contributing no
    // inversions thanks to the y tie-break) are the discordant pairs
    let numer = (n0 - n1 - n2 + n3) as f64 - 2.0 * inversions as f64;
    Corr {
        value: numer / denom.sqrt(),
        flagged: false,
    }
}

/// Benchmark report for one metric against one MOS file.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub plc: f64,
    pub src: f64,
    pub krc: f64,
    pub tau: [f64; 5],
    pub fit_rmse: f64,
    pub low_confidence: bool,
    pub flags: Vec<String>,
}

/// Runs the full PLC/SRC/KRC benchmark with a seeded logistic fit.
pub fn evaluate(pairs: &ScorePairs, seed: u64) -> Result<EvalReport> {
    let fit = fit_logistic5(pairs, seed)?;
    let p = plc(pairs, &fit);
    let s = srocc(pairs);
    let k = krcc(pairs);
    let mut flags = Vec::new();
    if fit.degenerate {
        flags.push("constant-objective".into());
    }
    if p.flagged {
        flags.push("plc-zero-variance".into());
    }
    if s.flagged || k.flagged {
        flags.push("rank-zero-variance".into());
    }
    Ok(EvalReport {
        n: pairs.len(),
        plc: p.value,
        src: s.value,
        krc: k.value,
        tau: fit.tau,
        fit_rmse: fit.rmse,
        low_confidence: pairs.low_confidence(),
        flags,
    })
}

/// Aligned text rendering of a report.
pub fn render_report(report: &EvalReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("{:<12} {:>10}\n", "pairs", report.n));
    s.push_str(&format!("{:<12} {:>10.6}\n", "PLC", report.plc));
    s.push_str(&format!("{:<12} {:>10.6}\n", "SRC", report.src));
    s.push_str(&format!("{:<12} {:>10.6}\n", "KRC", report.krc));
    s.push_str(&format!("{:<12} {:>10.4e}\n", "fit RMSE", report.fit_rmse));
    s.push_str(&format!(
        "{:<12} {:>10}\n",
        "confidence",
        if report.low_confidence { "low" } else { "ok" }
    ));
    if !report.flags.is_empty() {
        s.push_str(&format!("{:<12} {}\n", "flags", report.flags.join(", ")));
    }
    s
}
