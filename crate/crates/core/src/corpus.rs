//! Tagged documents and the synthetic summarization corpus.
//!
//! Each synthetic task leans on one kind of head: `copy` on positional
//! alignment and the copy head, `select-entities` on named-entity heads,
//! `lead-k` on positional heads.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::tensor::Rng;

/// Closed POS tag set used by the generator.
pub const POS_TAGS: [&str; 6] = ["NOUN", "VERB", "DET", "PUNCT", "PROPN", "OTHER"];
const NE_TAG: &str = "PROPN";
const RARE_POOL: usize = 1_000_000;

/// Source tokens with POS tags and named-entity flags, plus a reference summary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedDocument {
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    pub is_ne: Vec<bool>,
    pub summary: Vec<String>,
}

impl TaggedDocument {
    pub fn validate(&self) -> Result<()> {
        if self.pos.len() != self.tokens.len() {
            bail!(Data, "{} pos tags for {} tokens", self.pos.len(), self.tokens.len());
        }
        if self.is_ne.len() != self.tokens.len() {
            bail!(Data, "{} ne flags for {} tokens", self.is_ne.len(), self.tokens.len());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn ne_fraction(&self) -> f64 {
        if self.is_ne.is_empty() {
            return 0.0;
        }
        self.is_ne.iter().filter(|&&b| b).count() as f64 / self.is_ne.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Summary equals the source.
    Copy,
    /// Summary is the named-entity tokens in order.
    SelectEntities,
    /// Summary is the first `lead_k` tokens.
    LeadK,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub n_docs: usize,
    pub src_len_min: usize,
    pub src_len_max: usize,
    pub pos_tags: Vec<String>,
    pub ne_rate: f64,
    /// Distinct in-vocabulary word types.
    pub vocab_size: usize,
    pub oov_rate: f64,
    pub seed: u64,
    pub task: Task,
    pub lead_k: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            n_docs: 200,
            src_len_min: 6,
            src_len_max: 10,
            pos_tags: POS_TAGS.iter().map(|s| s.to_string()).collect(),
            ne_rate: 0.15,
            vocab_size: 40,
            oov_rate: 0.0,
            seed: 0,
            task: Task::Copy,
            lead_k: 3,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ne_rate) {
            bail!(Spec, "ne_rate {} outside [0, 1]", self.ne_rate);
        }
        if !(0.0..=1.0).contains(&self.oov_rate) {
            bail!(Spec, "oov_rate {} outside [0, 1]", self.oov_rate);
        }
        if self.src_len_min == 0 || self.src_len_max < self.src_len_min {
            bail!(Spec, "source length range {}..={} is empty or starts at 0", self.src_len_min, self.src_len_max);
        }
        if !self.pos_tags.iter().any(|t| t == NE_TAG) || self.pos_tags.len() < 2 {
            bail!(Spec, "pos_tags must contain {} and at least one other tag", NE_TAG);
        }
        if self.task == Task::LeadK && self.lead_k == 0 {
            bail!(Spec, "lead_k must be positive");
        }
        let (entities, common) = self.word_split();
        if self.needs_entities() && entities == 0 || self.ne_rate < 1.0 && common == 0 {
            bail!(Spec, "vocab_size {} too small for entity and common word types", self.vocab_size);
        }
        Ok(())
    }

    fn needs_entities(&self) -> bool {
        self.ne_rate > 0.0 || self.task == Task::SelectEntities
    }

    /// (entity word types, common word types)
    fn word_split(&self) -> (usize, usize) {
        let entities = if self.needs_entities() { (self.vocab_size / 4).max(1).min(self.vocab_size) } else { 0 };
        (entities, self.vocab_size - entities)
    }

    fn common_tags(&self) -> Vec<&str> {
        self.pos_tags.iter().map(String::as_str).filter(|t| *t != NE_TAG).collect()
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Entity,
    RareEntity,
    RareCommon,
    Common,
}

/// Deterministic synthetic corpus.
pub fn generate(spec: &CorpusSpec) -> Result<Vec<TaggedDocument>> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let (entities, common) = spec.word_split();
    let tags = spec.common_tags();
    let mut docs = Vec::with_capacity(spec.n_docs);
    for _ in 0..spec.n_docs {
        let len = spec.src_len_min + rng.below(spec.src_len_max - spec.src_len_min + 1);
        let mut kinds: Vec<Kind> = Vec::with_capacity(len);
        for attempt in 0.. {
            kinds.clear();
            for _ in 0..len {
                let ne = rng.bernoulli(spec.ne_rate);
                let oov = rng.bernoulli(spec.oov_rate);
                kinds.push(match (ne, oov) {
                    (true, false) => Kind::Entity,
                    (true, true) => Kind::RareEntity,
                    (false, true) => Kind::RareCommon,
                    (false, false) => Kind::Common,
                });
            }
            let has_entity = kinds.iter().any(|k| matches!(k, Kind::Entity | Kind::RareEntity));
            if spec.task != Task::SelectEntities || has_entity {
                break;
            }
            if attempt >= 100 {
                // Entity-free documents would have empty summaries.
                let at = rng.below(len);
                kinds[at] = Kind::Entity;
                break;
            }
        }
        let mut doc = TaggedDocument { tokens: Vec::new(), pos: Vec::new(), is_ne: Vec::new(), summary: Vec::new() };
        for kind in &kinds {
            let (token, tag, ne) = match kind {
                Kind::Entity => (format!("E{}", rng.below(entities)), NE_TAG, true),
                Kind::RareEntity => (format!("Z{}", rng.below(RARE_POOL)), NE_TAG, true),
                Kind::RareCommon => (format!("q{}", rng.below(RARE_POOL)), tags[0], false),
                Kind::Common => {
                    let w = rng.below(common);
                    (format!("w{w}"), tags[w % tags.len()], false)
                }
            };
            doc.tokens.push(token);
            doc.pos.push(tag.to_string());
            doc.is_ne.push(ne);
        }
        doc.summary = match spec.task {
            Task::Copy => doc.tokens.clone(),
            Task::SelectEntities => doc.tokens.iter().zip(&doc.is_ne).filter(|(_, &ne)| ne).map(|(t, _)| t.clone()).collect(),
            Task::LeadK => doc.tokens.iter().take(spec.lead_k).cloned().collect(),
        };
        docs.push(doc);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copy_summary_is_source() {
        let spec = CorpusSpec { n_docs: 3, src_len_min: 5, src_len_max: 5, ..CorpusSpec::default() };
        for d in generate(&spec).unwrap() {
            assert_eq!(d.tokens.len(), 5);
            assert_eq!(d.summary, d.tokens);
            d.validate().unwrap();
        }
    }

    #[test]
    fn select_entities_never_empty() {
        let spec = CorpusSpec { task: Task::SelectEntities, ne_rate: 0.0, n_docs: 20, ..CorpusSpec::default() };
        for d in generate(&spec).unwrap() {
            assert!(!d.summary.is_empty());
            assert!(d.summary.iter().all(|t| t.starts_with('E')));
        }
    }

    #[test]
    fn lead_k_takes_prefix() {
        let spec = CorpusSpec { task: Task::LeadK, lead_k: 2, n_docs: 5, ..CorpusSpec::default() };
        for d in generate(&spec).unwrap() {
            assert_eq!(d.summary[..], d.tokens[..2]);
        }
    }

    #[test]
    fn deterministic() {
        let spec = CorpusSpec { oov_rate: 0.3, ..CorpusSpec::default() };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = CorpusSpec { seed: 1, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn ne_fraction_tracks_rate() {
        let spec = CorpusSpec { n_docs: 2000, ne_rate: 0.2, ..CorpusSpec::default() };
        let docs = generate(&spec).unwrap();
        let total: usize = docs.iter().map(|d| d.len()).sum();
        let ne: usize = docs.iter().map(|d| d.is_ne.iter().filter(|&&b| b).count()).sum();
        assert!(total >= 10_000);
        assert!((ne as f64 / total as f64 - 0.2).abs() < 0.02);
    }

    #[test]
    fn invalid_specs() {
        assert!(CorpusSpec { ne_rate: 1.5, ..CorpusSpec::default() }.validate().is_err());
        assert!(CorpusSpec { oov_rate: -0.1, ..CorpusSpec::default() }.validate().is_err());
        assert!(CorpusSpec { vocab_size: 0, ..CorpusSpec::default() }.validate().is_err());
        assert!(CorpusSpec { src_len_min: 0, ..CorpusSpec::default() }.validate().is_err());
        assert!(CorpusSpec { vocab_size: 1, ne_rate: 0.5, ..CorpusSpec::default() }.validate().is_err());
    }

    #[test]
    fn length_mismatch_detected() {
        let mut d = generate(&CorpusSpec { n_docs: 1, ..CorpusSpec::default() }).unwrap().remove(0);
        d.pos.pop();
        assert!(d.validate().is_err());
    }
}
