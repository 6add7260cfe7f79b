//! Model checkpoints.
//!
//! Layout, little-endian: magic `ATNC`, version (u32), header length (u64),
//! UTF-8 JSON header, then an f64 payload holding every parameter tensor in
//! header order, the gate values, and (when present) the Hard-Concrete
//! `log α` values followed by β, ε and λ. Floats live only in the payload so
//! a reload is bit-exact.

use std::fs;
use std::path::Path;

use headlamp_core::gating::{GateLayout, GateMode, GateSet, HardConcreteParams};
use headlamp_core::model::{ActivationPlan, Model, ModelConfig, Params, Vocab};
use headlamp_core::training::TrainConfig;
use headlamp_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ATNC";
pub const VERSION: u32 = 1;

/// Everything needed to resume analysis of a trained model.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub gates: GateSet,
    /// Settings of the run that produced the model, if known.
    pub train: Option<TrainSettings>,
}

/// Integer and enum training settings; float hyperparameters are not needed
/// to reproduce analysis and stay out of the JSON header.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub seed: u64,
    pub max_steps: usize,
    pub batch_size: usize,
}

impl From<&TrainConfig> for TrainSettings {
    fn from(c: &TrainConfig) -> Self {
        TrainSettings { seed: c.seed, max_steps: c.max_steps, batch_size: c.batch_size }
    }
}

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GateHeader {
    mode: GateMode,
    layout: GateLayout,
    hard_concrete: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vec<String>,
    gates: GateHeader,
    params: Vec<TensorHeader>,
    train: Option<TrainSettings>,
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let params = ckpt.model.params();
    let header = Header {
        config: ckpt.model.config().clone(),
        vocab: ckpt.model.vocab().tokens().to_vec(),
        gates: GateHeader { mode: ckpt.gates.mode(), layout: ckpt.gates.layout(), hard_concrete: ckpt.gates.params().is_some() },
        params: params
            .names()
            .iter()
            .zip(params.tensors())
            .map(|(n, t)| TensorHeader { name: n.clone(), shape: t.shape().to_vec() })
            .collect(),
        train: ckpt.train.clone(),
    };
    let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
    params.tensors().iter().flat_map(|t| t.data()).for_each(|&v| put(v));
    ckpt.gates.values().iter().for_each(|&v| put(v));
    if let Some(p) = ckpt.gates.params() {
        p.log_alpha.iter().for_each(|&v| put(v));
        [p.beta, p.epsilon, p.lambda].into_iter().for_each(&mut put);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], String> {
        if self.bytes.len() < n {
            return Err(format!("truncated {what}: expected {n} bytes, found {}", self.bytes.len()));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn floats(&mut self, n: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
        let raw = self.take(n * 8, what)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    let mut r = Reader { bytes };
    if r.take(4, "magic")? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = u32::from_le_bytes(r.take(4, "version")?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(format!("checkpoint version {version} not supported (expected {VERSION})"));
    }
    let len = u64::from_le_bytes(r.take(8, "header length")?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| "header length overflows")?;
    let header: Header = serde_json::from_slice(r.take(len, "header")?).map_err(|e| format!("bad header: {e}"))?;
    if header.gates.layout != header.config.gate_layout() {
        return Err("gate layout does not match the model configuration".into());
    }
    let mut named = Vec::with_capacity(header.params.len());
    for p in &header.params {
        let n = p.shape.iter().product();
        let data = r.floats(n, &p.name)?;
        named.push((p.name.clone(), Tensor::new(&p.shape, data).map_err(|e| format!("{}: {e}", p.name))?));
    }
    let arch = |e: headlamp_core::Error| format!("architecture mismatch: {e}");
    let params = Params::from_named(&Params::init(&header.config), named).map_err(arch)?;
    let vocab = Vocab::from_tokens(header.vocab).map_err(arch)?;
    let model = Model::from_parts(header.config, vocab, params).map_err(arch)?;
    let layout = header.gates.layout;
    let values = r.floats(layout.len(), "gate values")?;
    let hc = if header.gates.hard_concrete {
        let log_alpha = r.floats(layout.len(), "log_alpha")?;
        let s = r.floats(3, "gate hyperparameters")?;
        Some(HardConcreteParams { log_alpha, beta: s[0], epsilon: s[1], lambda: s[2] })
    } else {
        None
    };
    if !r.bytes.is_empty() {
        return Err(format!("{} unexpected trailing bytes", r.bytes.len()));
    }
    let gates = GateSet::from_parts(header.gates.mode, layout, values, hc).map_err(|e| e.to_string())?;
    Ok(Checkpoint { model, gates, train: header.train })
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, encode(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|m| Error::format(path, m))
}

/// Loads a checkpoint, optionally under a different activation plan. A plan
/// that differs from the stored one is refused unless `allow_override`.
pub fn load_with_plan(path: &Path, plan: Option<ActivationPlan>, allow_override: bool) -> Result<Checkpoint> {
    let mut ckpt = load(path)?;
    let stored = ckpt.model.config().activation_plan;
    match plan {
        Some(p) if p != stored && !allow_override => Err(Error::Usage(format!(
            "{}: checkpoint was trained with plan {} but {} was requested; pass the override flag to allow",
            path.display(),
            stored.as_str(),
            p.as_str()
        ))),
        Some(p) => {
            ckpt.model = ckpt.model.with_plan(p);
            Ok(ckpt)
        }
        None => Ok(ckpt),
    }
}
