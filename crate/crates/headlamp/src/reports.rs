//! CSV and JSON reports for external plotting. CSV tables are long-format
//! with a header row; JSON documents carry a `"v"` schema version.

use headlamp_core::evalstats::AblationResult;
use headlamp_core::gating::{GateSet, HeadAddress};
use headlamp_core::metrics::{HeadReport, Metric, MetricProfile};
use headlamp_core::training::{LossRecord, SweepRow};
use serde::Serialize;

pub const REPORT_VERSION: u32 = 1;

/// One `(head, metric, value)` row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub region: &'static str,
    pub layer: usize,
    pub head: usize,
    pub metric: String,
    pub value: f64,
}

/// Long-format rows: the four headline metrics, each configured
/// relative-location offset, and the exact-zero fraction.
pub fn metric_rows(reports: &[HeadReport]) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for r in reports {
        let mut push = |metric: String, value: f64| {
            rows.push(MetricRow { region: r.address.region.as_str(), layer: r.address.layer, head: r.address.head, metric, value })
        };
        for m in Metric::ALL {
            push(m.as_str().to_string(), r.metric(m));
        }
        for &(offset, ratio) in &r.rel_location.ratios {
            push(format!("rel_location{offset:+}"), ratio);
        }
        push("zero_fraction".into(), r.zero_fraction);
    }
    rows
}

pub fn head_reports_csv(reports: &[HeadReport]) -> String {
    let mut out = String::from("region,layer,head,metric,value\n");
    for r in metric_rows(reports) {
        out.push_str(&format!("{},{},{},{},{:?}\n", r.region, r.layer, r.head, r.metric, r.value));
    }
    out
}

#[derive(Serialize)]
struct HeadReportDoc<'a> {
    v: u32,
    docs: usize,
    rows: Vec<MetricRow>,
    heads: &'a [HeadReport],
}

pub fn head_reports_json(reports: &[HeadReport], docs: usize) -> String {
    let doc = HeadReportDoc { v: REPORT_VERSION, docs, rows: metric_rows(reports), heads: reports };
    serde_json::to_string_pretty(&doc).expect("report serializes")
}

pub fn ablation_csv(results: &[AblationResult]) -> String {
    let mut out = String::from("head,mean_delta,t,p,significant\n");
    for r in results {
        out.push_str(&format!("{},{:?},{:?},{:?},{}\n", r.head, r.mean_delta, r.t, r.p, r.significant));
    }
    out
}

pub fn loss_curve_csv(curve: &[LossRecord]) -> String {
    let mut out = String::from("step,cross_entropy,l0_penalty,total\n");
    for r in curve {
        out.push_str(&format!("{},{:?},{:?},{:?}\n", r.step, r.cross_entropy, r.l0_penalty, r.total));
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("lambda,pruned_encoder,pruned_decoder,rouge1,rouge2,rougeL,token_accuracy\n");
    for r in rows {
        let m = &r.metrics;
        out.push_str(&format!(
            "{:?},{},{},{:?},{:?},{:?},{:?}\n",
            r.lambda, r.pruned_encoder, r.pruned_decoder, m.rouge.r1_f1, m.rouge.r2_f1, m.rouge.rl_f1, m.token_accuracy
        ));
    }
    out
}

/// Per-head gate values and metrics after pruning at one λ.
pub fn retained_csv(lambda: f64, gates: &GateSet, reports: &[HeadReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let gate = gates.value(r.address).unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{:?},{},{},{},{:?},{},{:?},{:?},{:?},{:?}\n",
            lambda,
            r.address.region.as_str(),
            r.address.layer,
            r.address.head,
            gate,
            gate > 0.0,
            r.rel_location.headline,
            r.confidence,
            r.pos_kl,
            r.ne_ratio
        ));
    }
    out
}

pub const RETAINED_HEADER: &str = "lambda,region,layer,head,gate,retained,rel_location,confidence,pos_kl,ne_ratio\n";

pub fn profiles_csv(profiles: &[MetricProfile]) -> String {
    let mut out = String::from("metric,region,rank,seed_a,seed_b,difference\n");
    for p in profiles {
        for (i, ((a, b), d)) in p.sorted_a.iter().zip(&p.sorted_b).zip(&p.differences).enumerate() {
            out.push_str(&format!("{},{},{},{:?},{:?},{:?}\n", p.metric.as_str(), p.region.as_str(), i, a, b, d));
        }
    }
    out
}

/// Heads named as `region/Llayer/Hhead`, the same form used in CSV output.
pub fn parse_head(s: &str) -> Option<HeadAddress> {
    let mut parts = s.split('/');
    let region = headlamp_core::gating::Region::parse(parts.next()?)?;
    let layer = parts.next()?.strip_prefix('L')?.parse().ok()?;
    let head = parts.next()?.strip_prefix('H')?.parse().ok()?;
    parts.next().is_none().then_some(HeadAddress::new(region, layer, head))
}
