use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::TaggedDocument;
use crate::error::{bail, Result};

pub const UNK: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
const SPECIALS: [&str; 3] = ["<unk>", "<bos>", "<eos>"];

/// Fixed output vocabulary. Ids 0..3 are `<unk>`, `<bos>`, `<eos>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 || tokens.iter().zip(SPECIALS).any(|(t, s)| t != s) {
            bail!(Data, "vocabulary must start with {:?}", SPECIALS);
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                bail!(Data, "duplicate vocabulary entry {:?}", t);
            }
        }
        Ok(Vocab { tokens, index })
    }

    /// Source tokens seen at least `min_count` times, most frequent first
    /// (ties by byte order), capped so the vocabulary holds `capacity` entries.
    /// Summaries are not counted since they repeat source tokens.
    pub fn build(docs: &[TaggedDocument], capacity: usize, min_count: usize) -> Result<Self> {
        if capacity < SPECIALS.len() {
            bail!(Config, "vocabulary capacity {} below the special symbols", capacity);
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for d in docs {
            for t in &d.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|(t, c)| *c >= min_count && !SPECIALS.contains(t)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(ranked.into_iter().take(capacity - SPECIALS.len()).map(|(t, _)| t.to_string()));
        Vocab::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Maps a document onto model ids, truncating to the given limits.
    pub fn encode(&self, doc: &TaggedDocument, max_src_len: usize, max_tgt_len: usize) -> Result<EncodedExample> {
        if doc.tokens.is_empty() {
            bail!(Argument, "empty source document");
        }
        let source: Vec<String> = doc.tokens.iter().take(max_src_len).cloned().collect();
        let mut oov: Vec<String> = Vec::new();
        let mut source_ids = Vec::with_capacity(source.len());
        let mut source_ext = Vec::with_capacity(source.len());
        for t in &source {
            match self.id(t) {
                Some(id) => {
                    source_ids.push(id);
                    source_ext.push(id);
                }
                None => {
                    let k = match oov.iter().position(|o| o == t) {
                        Some(k) => k,
                        None => {
                            oov.push(t.clone());
                            oov.len() - 1
                        }
                    };
                    source_ids.push(UNK);
                    source_ext.push(self.len() + k);
                }
            }
        }
        let keep = doc.summary.len().min(max_tgt_len.saturating_sub(1));
        let mut target_out = Vec::with_capacity(keep + 1);
        for t in &doc.summary[..keep] {
            let id = self.id(t).or_else(|| oov.iter().position(|o| o == t).map(|k| self.len() + k)).unwrap_or(UNK);
            target_out.push(id);
        }
        target_out.push(EOS);
        let mut target_in = Vec::with_capacity(target_out.len());
        target_in.push(BOS);
        target_in.extend(target_out[..target_out.len() - 1].iter().map(|&id| if id >= self.len() { UNK } else { id }));
        Ok(EncodedExample { source, source_ids, source_ext, oov, target_in, target_out })
    }
}

/// A document in model ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedExample {
    /// Source tokens after truncation.
    pub source: Vec<String>,
    /// Embedding ids; out-of-vocabulary tokens map to `<unk>`.
    pub source_ids: Vec<usize>,
    /// Extended-vocabulary ids; source-only tokens get ids past the vocabulary.
    pub source_ext: Vec<usize>,
    /// Source-only tokens in order of first appearance.
    pub oov: Vec<String>,
    /// Decoder inputs: `<bos>` then the summary, copied tokens as `<unk>`.
    pub target_in: Vec<usize>,
    /// Decoder targets in extended ids, ending in `<eos>`.
    pub target_out: Vec<usize>,
}

impl EncodedExample {
    pub fn extended_size(&self, vocab_len: usize) -> usize {
        vocab_len + self.oov.len()
    }
}
