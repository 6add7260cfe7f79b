//! File formats, parallel drivers and the command-line front end for
//! `headlamp-core`.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod jsonl;
pub mod parallel;
pub mod reports;
pub mod tensor_file;
pub mod trace;

pub use error::{Error, Result};
pub use headlamp_core as core;
