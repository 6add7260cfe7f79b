//! Head-specialization metrics over traced attention.
//!
//! Every metric is computed per document first and then averaged over
//! documents, so long documents do not dominate. Per-document values are
//! summed in sorted order, which makes the result independent of the order
//! documents arrive in.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::TaggedDocument;
use crate::error::{bail, Result};
use crate::gating::{HeadAddress, Region};
use crate::model::AttentionRecord;
use crate::tensor::Tensor;

/// Floor for document tag frequencies inside the KL divergence.
pub const KL_FLOOR: f64 = 1e-9;

pub const ENCODER_OFFSETS: [i64; 2] = [-1, 1];
pub const CROSS_OFFSETS: [i64; 3] = [-1, 0, 1];

/// Offsets counted as "neighboring" for a region.
pub fn default_offsets(region: Region) -> &'static [i64] {
    match region {
        Region::EncoderSelf => &ENCODER_OFFSETS,
        Region::DecoderCross => &CROSS_OFFSETS,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RelLocation,
    Confidence,
    PosKl,
    NeRatio,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::RelLocation, Metric::Confidence, Metric::PosKl, Metric::NeRatio];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::RelLocation => "rel_location",
            Metric::Confidence => "confidence",
            Metric::PosKl => "pos_kl",
            Metric::NeRatio => "ne_ratio",
        }
    }
}

fn ordered_mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn first_argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn require_rows(rows: &[&Tensor]) -> Result<()> {
    if rows.is_empty() || rows.iter().any(|r| r.is_empty()) {
        bail!(Argument, "no attention records");
    }
    Ok(())
}

fn check_docs(rows: &[&Tensor], docs: &[&TaggedDocument]) -> Result<()> {
    require_rows(rows)?;
    if rows.len() != docs.len() {
        bail!(Argument, "{} records for {} documents", rows.len(), docs.len());
    }
    for (r, d) in rows.iter().zip(docs) {
        if r.cols() > d.len() {
            bail!(Data, "attention spans {} keys but the document has {} tokens", r.cols(), d.len());
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeLocation {
    /// `(offset, ratio)` for every configured offset.
    pub ratios: Vec<(i64, f64)>,
    pub headline: f64,
}

/// Fraction of query steps whose first argmax key sits at `query + offset`.
///
/// `rows` holds one `queries × keys` matrix per document.
pub fn relative_location(rows: &[&Tensor], offsets: &[i64]) -> Result<RelativeLocation> {
    require_rows(rows)?;
    if offsets.is_empty() {
        bail!(Argument, "no offsets");
    }
    let mut per_offset: Vec<Vec<f64>> = vec![Vec::with_capacity(rows.len()); offsets.len()];
    for m in rows {
        let mut hits = vec![0usize; offsets.len()];
        for q in 0..m.rows() {
            let delta = first_argmax(m.row_slice(q)) as i64 - q as i64;
            for (h, &o) in hits.iter_mut().zip(offsets) {
                if delta == o {
                    *h += 1;
                }
            }
        }
        for (acc, h) in per_offset.iter_mut().zip(hits) {
            acc.push(h as f64 / m.rows() as f64);
        }
    }
    let ratios: Vec<(i64, f64)> = offsets.iter().copied().zip(per_offset.into_iter().map(ordered_mean)).collect();
    let headline = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(RelativeLocation { ratios, headline })
}

/// Mean of the row maxima.
pub fn confidence(rows: &[&Tensor]) -> Result<f64> {
    require_rows(rows)?;
    let per_doc = rows
        .iter()
        .map(|m| (0..m.rows()).map(|q| m.row_slice(q).iter().copied().fold(0.0, f64::max)).sum::<f64>() / m.rows() as f64)
        .collect();
    Ok(ordered_mean(per_doc))
}

/// Mean over documents of `KL(attention-weighted tag histogram ‖ document tag histogram)`.
pub fn pos_kl(rows: &[&Tensor], docs: &[&TaggedDocument], tags: &[String]) -> Result<f64> {
    check_docs(rows, docs)?;
    let index: BTreeMap<&str, usize> = tags.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut per_doc = Vec::with_capacity(docs.len());
    for (m, doc) in rows.iter().zip(docs) {
        let mut doc_hist = vec![0.0; tags.len()];
        let mut tag_of = Vec::with_capacity(doc.len());
        for t in &doc.pos {
            let Some(&i) = index.get(t.as_str()) else { bail!(Data, "tag {:?} not in the tag vocabulary", t) };
            doc_hist[i] += 1.0;
            tag_of.push(i);
        }
        let mut attn_hist = vec![0.0; tags.len()];
        for q in 0..m.rows() {
            for (k, &w) in m.row_slice(q).iter().enumerate() {
                attn_hist[tag_of[k]] += w;
            }
        }
        per_doc.push(kl_divergence(&attn_hist, &doc_hist));
    }
    Ok(ordered_mean(per_doc))
}

/// `KL(p ‖ q)` of two unnormalized histograms; empty `p` bins contribute 0.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if sp <= 0.0 || sq <= 0.0 {
        return 0.0;
    }
    let kl: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| {
            let (a, b) = (pi / sp, (qi / sq).max(KL_FLOOR));
            a * libm::log(a / b)
        })
        .sum();
    kl.max(0.0)
}

/// Share of attention mass landing on named-entity tokens.
pub fn ne_ratio(rows: &[&Tensor], docs: &[&TaggedDocument]) -> Result<f64> {
    check_docs(rows, docs)?;
    let per_doc = rows
        .iter()
        .zip(docs)
        .map(|(m, doc)| {
            let (mut ne, mut total) = (0.0, 0.0);
            for q in 0..m.rows() {
                for (k, &w) in m.row_slice(q).iter().enumerate() {
                    total += w;
                    if doc.is_ne[k] {
                        ne += w;
                    }
                }
            }
            if total > 0.0 {
                ne / total
            } else {
                0.0
            }
        })
        .collect();
    Ok(ordered_mean(per_doc))
}

/// All four metrics for one head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadReport {
    pub address: HeadAddress,
    pub rel_location: RelativeLocation,
    pub confidence: f64,
    pub pos_kl: f64,
    pub ne_ratio: f64,
    /// Share of attention entries that are exactly zero.
    pub zero_fraction: f64,
    pub doc_count: usize,
}

impl HeadReport {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::RelLocation => self.rel_location.headline,
            Metric::Confidence => self.confidence,
            Metric::PosKl => self.pos_kl,
            Metric::NeRatio => self.ne_ratio,
        }
    }
}

/// Reports for every head found in `traces`, one trace per document, using
/// the default offsets.
pub fn head_reports(traces: &[Vec<AttentionRecord>], docs: &[TaggedDocument], tags: &[String]) -> Result<Vec<HeadReport>> {
    head_reports_with(traces, docs, tags, &ENCODER_OFFSETS, &CROSS_OFFSETS)
}

pub fn head_reports_with(
    traces: &[Vec<AttentionRecord>],
    docs: &[TaggedDocument],
    tags: &[String],
    encoder_offsets: &[i64],
    cross_offsets: &[i64],
) -> Result<Vec<HeadReport>> {
    if traces.len() != docs.len() {
        bail!(Argument, "{} traces for {} documents", traces.len(), docs.len());
    }
    let mut by_head: BTreeMap<HeadAddress, (Vec<&Tensor>, Vec<&TaggedDocument>)> = BTreeMap::new();
    for (trace, doc) in traces.iter().zip(docs) {
        for r in trace {
            let e = by_head.entry(r.address).or_default();
            e.0.push(&r.rows);
            e.1.push(doc);
        }
    }
    let mut out = Vec::with_capacity(by_head.len());
    for (address, (rows, ds)) in by_head {
        let entries: usize = rows.iter().map(|r| r.len()).sum();
        let zeros: usize = rows.iter().map(|r| r.data().iter().filter(|&&v| v == 0.0).count()).sum();
        out.push(HeadReport {
            address,
            rel_location: relative_location(
                &rows,
                match address.region {
                    Region::EncoderSelf => encoder_offsets,
                    Region::DecoderCross => cross_offsets,
                },
            )?,
            confidence: confidence(&rows)?,
            pos_kl: pos_kl(&rows, &ds, tags)?,
            ne_ratio: ne_ratio(&rows, &ds)?,
            zero_fraction: zeros as f64 / entries as f64,
            doc_count: rows.len(),
        });
    }
    Ok(out)
}

/// Sorted per-head values of one metric in one region for two models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricProfile {
    pub metric: Metric,
    pub region: Region,
    pub sorted_a: Vec<f64>,
    pub sorted_b: Vec<f64>,
    /// `sorted_a[i] − sorted_b[i]`.
    pub differences: Vec<f64>,
}

/// Compares two models' head profiles as distributions; heads are not
/// matched across models, only sorted values are.
pub fn compare_seeds(a: &[HeadReport], b: &[HeadReport]) -> Result<Vec<MetricProfile>> {
    let mut out = Vec::new();
    for region in Region::ALL {
        let pick = |rs: &[HeadReport]| rs.iter().filter(|r| r.address.region == region).cloned().collect::<Vec<_>>();
        let (ra, rb) = (pick(a), pick(b));
        if ra.len() != rb.len() {
            bail!(Argument, "{} has {} heads in one model and {} in the other", region, ra.len(), rb.len());
        }
        if ra.is_empty() {
            continue;
        }
        for metric in Metric::ALL {
            let sorted = |rs: &[HeadReport]| {
                let mut v: Vec<f64> = rs.iter().map(|r| r.metric(metric)).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let (sa, sb) = (sorted(&ra), sorted(&rb));
            let differences = sa.iter().zip(&sb).map(|(x, y)| x - y).collect();
            out.push(MetricProfile { metric, region, sorted_a: sa, sorted_b: sb, differences });
        }
    }
    Ok(out)
}
