//! Transparent multi-head attention toolkit.
//!
//! The crate is `no_std` (it needs `alloc`). It carries a small dense tensor
//! type with a reverse-mode tape, softmax/sparsemax attention, per-head gates
//! (binary ablation, Hard-Concrete L0 training, fixed inferred values), a toy
//! encoder-decoder summarizer with a copy head, the head-specialization
//! metrics, ROUGE scoring and paired significance testing, and a synthetic
//! tagged corpus generator.
//!
//! File formats, corpus ingestion and the command line live in the companion
//! `headlamp` crate.

#![no_std]

extern crate alloc;

pub mod activations;
pub mod autodiff;
pub mod corpus;
pub mod error;
pub mod evalstats;
pub mod gating;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{Rng, Tensor};
