//! Toy encoder-decoder summarizer with gated multi-head attention and a copy head.
//!
//! Pre-norm residual blocks, sinusoidal positions, greedy decoding. The copy
//! head is head 0 of the top decoder layer's cross-attention; its weights
//! double as the pointer distribution over source positions.

mod network;
mod params;
mod vocab;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use network::{DecodeOutput, ExampleGradients, Model, StepOutput, PROB_FLOOR};
pub use params::Params;
pub use vocab::{EncodedExample, Vocab, BOS, EOS, UNK};

use crate::activations::ActivationKind;
use crate::error::{bail, Result};
use crate::gating::{GateLayout, HeadAddress, Region};
use crate::tensor::Tensor;

/// Which attention sites use sparsemax instead of softmax.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationPlan {
    /// Softmax everywhere.
    #[default]
    Dense,
    /// Sparsemax in encoder self-attention only.
    SparseEnc,
    /// Sparsemax everywhere except the decoder's top layer.
    #[serde(rename = "sparse-tl")]
    SparseTL,
    /// Sparsemax everywhere except the copy head.
    #[serde(rename = "sparse-ch")]
    SparseCH,
    /// Sparsemax in every gated site, copy head included.
    SparseAll,
}

impl ActivationPlan {
    pub const ALL: [ActivationPlan; 5] =
        [ActivationPlan::Dense, ActivationPlan::SparseEnc, ActivationPlan::SparseTL, ActivationPlan::SparseCH, ActivationPlan::SparseAll];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivationPlan::Dense => "dense",
            ActivationPlan::SparseEnc => "sparse-enc",
            ActivationPlan::SparseTL => "sparse-tl",
            ActivationPlan::SparseCH => "sparse-ch",
            ActivationPlan::SparseAll => "sparse-all",
        }
    }

    pub fn parse(s: &str) -> Option<ActivationPlan> {
        ActivationPlan::ALL.into_iter().find(|p| p.as_str() == s)
    }

    /// Normalizer for a gated head. Decoder self-attention is always softmax.
    pub fn kind(self, addr: HeadAddress, dec_layers: usize) -> ActivationKind {
        let sparse = match (self, addr.region) {
            (ActivationPlan::Dense, _) => false,
            (ActivationPlan::SparseEnc, region) => region == Region::EncoderSelf,
            (ActivationPlan::SparseTL, Region::EncoderSelf) => true,
            (ActivationPlan::SparseTL, Region::DecoderCross) => addr.layer + 1 != dec_layers,
            (ActivationPlan::SparseCH, _) => !is_copy_head(addr, dec_layers),
            (ActivationPlan::SparseAll, _) => true,
        };
        if sparse {
            ActivationKind::Sparsemax
        } else {
            ActivationKind::Softmax
        }
    }
}

impl core::fmt::Display for ActivationPlan {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The copy head: head 0 of the top decoder layer's cross-attention.
pub fn copy_head(dec_layers: usize) -> HeadAddress {
    HeadAddress::new(Region::DecoderCross, dec_layers - 1, 0)
}

pub fn is_copy_head(addr: HeadAddress, dec_layers: usize) -> bool {
    addr == copy_head(dec_layers)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads_per_layer: usize,
    pub head_dim: usize,
    pub model_dim: usize,
    pub ff_dim: usize,
    /// In-vocabulary types, specials included.
    pub vocab_size: usize,
    pub max_src_len: usize,
    pub max_tgt_len: usize,
    pub activation_plan: ActivationPlan,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            enc_layers: 2,
            dec_layers: 2,
            heads_per_layer: 4,
            head_dim: 8,
            model_dim: 32,
            ff_dim: 64,
            vocab_size: 64,
            max_src_len: 400,
            max_tgt_len: 100,
            activation_plan: ActivationPlan::Dense,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.enc_layers == 0 || self.dec_layers == 0 || self.heads_per_layer == 0 || self.head_dim == 0 {
            bail!(Config, "layer, head and head_dim counts must be positive");
        }
        if self.model_dim != self.heads_per_layer * self.head_dim {
            bail!(Config, "model_dim {} != heads_per_layer {} x head_dim {}", self.model_dim, self.heads_per_layer, self.head_dim);
        }
        if self.ff_dim == 0 || self.max_src_len == 0 || self.max_tgt_len == 0 {
            bail!(Config, "ff_dim and length limits must be positive");
        }
        if self.vocab_size < 3 {
            bail!(Config, "vocabulary must hold the three special symbols");
        }
        Ok(())
    }

    pub fn gate_layout(&self) -> GateLayout {
        GateLayout { enc_layers: self.enc_layers, dec_layers: self.dec_layers, heads: self.heads_per_layer }
    }

    /// Same architecture, possibly differing in plan or seed.
    pub fn same_architecture(&self, other: &ModelConfig) -> bool {
        self.enc_layers == other.enc_layers
            && self.dec_layers == other.dec_layers
            && self.heads_per_layer == other.heads_per_layer
            && self.head_dim == other.head_dim
            && self.model_dim == other.model_dim
            && self.ff_dim == other.ff_dim
            && self.vocab_size == other.vocab_size
    }
}

/// Attention distributions of one head for one document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub address: HeadAddress,
    /// `query steps × key positions`, each row on the simplex.
    pub rows: Tensor,
}

impl AttentionRecord {
    pub fn new(address: HeadAddress, rows: Tensor) -> Result<Self> {
        if rows.shape().len() != 2 {
            bail!(Shape, "attention rows must form a matrix");
        }
        for r in 0..rows.rows() {
            let row = rows.row_slice(r);
            if row.iter().any(|&v| v < 0.0) || libm::fabs(row.iter().sum::<f64>() - 1.0) > 1e-6 {
                bail!(Argument, "row {} of {} is not a probability vector", r, address);
            }
        }
        Ok(AttentionRecord { address, rows })
    }

    pub fn exact_zeros(&self) -> usize {
        self.rows.data().iter().filter(|&&v| v == 0.0).count()
    }
}

/// Sinusoidal position table, `len × dim`.
pub fn positional_encoding(len: usize, dim: usize) -> Tensor {
    let mut data = Vec::with_capacity(len * dim);
    for pos in 0..len {
        for i in 0..dim {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / libm::pow(10_000.0, 2.0 * pair / dim as f64);
            data.push(if i % 2 == 0 { libm::sin(angle) } else { libm::cos(angle) });
        }
    }
    Tensor::from_parts(alloc::vec![len, dim], data)
}
