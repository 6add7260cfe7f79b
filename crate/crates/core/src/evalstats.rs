//! ROUGE scoring, paired t-tests and the head-ablation harness.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::TaggedDocument;
use crate::error::{bail, Result};
use crate::gating::{GateSet, HeadAddress};
use crate::model::Model;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrecisionRecall {
    fn from_counts(overlap: usize, cand: usize, reference: usize) -> Self {
        if overlap == 0 || cand == 0 || reference == 0 {
            return PrecisionRecall { precision: 0.0, recall: 0.0, f1: 0.0 };
        }
        let p = overlap as f64 / cand as f64;
        let r = overlap as f64 / reference as f64;
        // Same value as 2PR/(P+R), with a single rounding.
        let f1 = (2 * overlap) as f64 / (cand + reference) as f64;
        PrecisionRecall { precision: p, recall: r, f1 }
    }
}

fn ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> BTreeMap<Vec<&str>, usize> {
    let mut counts = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram overlap precision, recall and F1.
pub fn rouge_n_scores<S: AsRef<str>>(candidate: &[S], reference: &[S], n: usize) -> PrecisionRecall {
    let (c, r) = (ngrams(candidate, n), ngrams(reference, n));
    let overlap = c.iter().map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0))).sum();
    PrecisionRecall::from_counts(overlap, c.values().sum(), r.values().sum())
}

pub fn rouge_n<S: AsRef<str>>(candidate: &[S], reference: &[S], n: usize) -> f64 {
    rouge_n_scores(candidate, reference, n).f1
}

/// Longest common subsequence length.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Whole-sequence LCS F1 (no sentence splitting).
pub fn rouge_l_scores<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> PrecisionRecall {
    PrecisionRecall::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    rouge_l_scores(candidate, reference).f1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub r1_f1: f64,
    pub r2_f1: f64,
    pub rl_f1: f64,
}

pub fn rouge<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> RougeScores {
    RougeScores { r1_f1: rouge_n(candidate, reference, 1), r2_f1: rouge_n(candidate, reference, 2), rl_f1: rouge_l(candidate, reference) }
}

/// Unweighted mean over pairs.
pub fn mean_rouge(scores: &[RougeScores]) -> RougeScores {
    if scores.is_empty() {
        return RougeScores::default();
    }
    let n = scores.len() as f64;
    RougeScores {
        r1_f1: scores.iter().map(|s| s.r1_f1).sum::<f64>() / n,
        r2_f1: scores.iter().map(|s| s.r2_f1).sum::<f64>() / n,
        rl_f1: scores.iter().map(|s| s.rl_f1).sum::<f64>() / n,
    }
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = core::f64::consts::PI;
        return libm::log(pi / libm::fabs(libm::sin(pi * x))) - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * libm::log(2.0 * core::f64::consts::PI) + (x + 0.5) * libm::log(t) - t + libm::log(a)
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if libm::fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if libm::fabs(delta - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        bail!(Argument, "beta parameters must be positive");
    }
    if !(0.0..=1.0).contains(&x) {
        bail!(Argument, "x = {} outside [0, 1]", x);
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * libm::log(x) + b * libm::log(1.0 - x);
    let front = libm::exp(ln_front);
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> Result<f64> {
    if df.is_nan() || df <= 0.0 {
        bail!(Argument, "degrees of freedom must be positive");
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub mean: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

/// Paired (one-sample on differences) two-sided t-test.
///
/// Zero spread: a zero mean gives `t = 0, p = 1`; a nonzero mean is reported
/// as significant with `t = ±∞, p = 0`.
pub fn paired_t_test(deltas: &[f64], alpha: f64) -> Result<TTest> {
    let n = deltas.len();
    if n < 2 {
        bail!(Argument, "t-test needs at least 2 paired values, got {}", n);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!(Argument, "alpha {} outside (0, 1)", alpha);
    }
    let mean = deltas.iter().sum::<f64>() / n as f64;
    let var = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = libm::sqrt(var);
    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { n, mean, t: 0.0, p: 1.0, significant: false }
        } else {
            TTest { n, mean, t: f64::INFINITY.copysign(mean), p: 0.0, significant: true }
        });
    }
    let t = mean / (sd / libm::sqrt(n as f64));
    let p = student_t_two_sided(t, (n - 1) as f64)?;
    Ok(TTest { n, mean, t, p, significant: p < alpha })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub head: HeadAddress,
    /// Ablated minus intact ROUGE-1 F1, one per document.
    pub deltas: Vec<f64>,
    pub mean_delta: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

/// Greedy summaries for each document.
pub fn decode_all(model: &Model, gates: &GateSet, docs: &[TaggedDocument]) -> Result<Vec<Vec<String>>> {
    docs.iter()
        .enumerate()
        .map(|(i, d)| model.decode(gates, d, false).map(|o| o.tokens).map_err(|e| crate::Error::Data(alloc::format!("document {i}: {e}"))))
        .collect()
}

/// Per-document ROUGE-1 F1 of `summaries` against the references.
pub fn rouge1_per_doc(summaries: &[Vec<String>], docs: &[TaggedDocument]) -> Vec<f64> {
    summaries.iter().zip(docs).map(|(s, d)| rouge_n(s, &d.summary, 1)).collect()
}

/// One paired comparison from intact and ablated per-document scores.
pub fn ablation_result(head: HeadAddress, intact: &[f64], ablated: &[f64], alpha: f64) -> Result<AblationResult> {
    if intact.len() != ablated.len() {
        bail!(Argument, "{} intact scores vs {} ablated", intact.len(), ablated.len());
    }
    let deltas: Vec<f64> = ablated.iter().zip(intact).map(|(a, b)| a - b).collect();
    let test = paired_t_test(&deltas, alpha)?;
    Ok(AblationResult { head, mean_delta: test.mean, t: test.t, p: test.p, significant: test.significant, deltas })
}

/// Zeroes each listed head in turn and tests the per-document ROUGE-1 change.
pub fn ablate_heads(
    model: &Model,
    gates: &GateSet,
    docs: &[TaggedDocument],
    heads: &[HeadAddress],
    alpha: f64,
) -> Result<Vec<AblationResult>> {
    let intact = rouge1_per_doc(&decode_all(model, gates, docs)?, docs);
    heads
        .iter()
        .map(|&h| {
            let ablated_gates = gates.ablated(h)?;
            let ablated = rouge1_per_doc(&decode_all(model, &ablated_gates, docs)?, docs);
            ablation_result(h, &intact, &ablated, alpha)
        })
        .collect()
}

/// End-task quality of greedy summaries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub rouge: RougeScores,
    /// Position-wise matches over `max(len(candidate), len(reference))`, pooled over documents.
    pub token_accuracy: f64,
}

pub fn token_accuracy(summaries: &[Vec<String>], docs: &[TaggedDocument]) -> f64 {
    let (mut hits, mut total) = (0usize, 0usize);
    for (s, d) in summaries.iter().zip(docs) {
        hits += s.iter().zip(&d.summary).filter(|(a, b)| a == b).count();
        total += s.len().max(d.summary.len());
    }
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}

pub fn task_metrics(summaries: &[Vec<String>], docs: &[TaggedDocument]) -> TaskMetrics {
    let scores: Vec<RougeScores> = summaries.iter().zip(docs).map(|(s, d)| rouge(s, &d.summary)).collect();
    TaskMetrics { rouge: mean_rouge(&scores), token_accuracy: token_accuracy(summaries, docs) }
}

pub fn evaluate(model: &Model, gates: &GateSet, docs: &[TaggedDocument]) -> Result<TaskMetrics> {
    Ok(task_metrics(&decode_all(model, gates, docs)?, docs))
}
