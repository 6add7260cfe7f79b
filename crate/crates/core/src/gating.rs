//! Per-head gates: binary ablation switches, Hard-Concrete gates trained under
//! the expected-L0 penalty, and the fixed values inferred from trained gates.
//!
//! Gates exist only for encoder self-attention and decoder cross-attention
//! heads. Decoder self-attention is never gated.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::autodiff::sigmoid;
use crate::error::{bail, Result};
use crate::tensor::Rng;

/// Temperature used for the Hard-Concrete relaxation.
pub const DEFAULT_BETA: f64 = 2.0 / 3.0;
/// Stretch of the Hard-Concrete support to `(−ε, 1 + ε)`.
pub const DEFAULT_EPSILON: f64 = 0.1;
/// Starting `log α`; every gate begins almost surely open.
pub const DEFAULT_LOG_ALPHA: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    EncoderSelf,
    DecoderCross,
}

impl Region {
    pub const ALL: [Region; 2] = [Region::EncoderSelf, Region::DecoderCross];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::EncoderSelf => "encoder-self",
            Region::DecoderCross => "decoder-cross",
        }
    }

    pub fn parse(s: &str) -> Option<Region> {
        match s {
            "encoder-self" => Some(Region::EncoderSelf),
            "decoder-cross" => Some(Region::DecoderCross),
            _ => None,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A gated head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HeadAddress {
    pub region: Region,
    pub layer: usize,
    pub head: usize,
}

impl HeadAddress {
    pub fn new(region: Region, layer: usize, head: usize) -> Self {
        HeadAddress { region, layer, head }
    }
}

impl fmt::Display for HeadAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/L{}/H{}", self.region, self.layer, self.head)
    }
}

/// Shape of the gated part of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateLayout {
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
}

impl GateLayout {
    pub fn len(&self) -> usize {
        (self.enc_layers + self.dec_layers) * self.heads
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index: encoder layers first, then decoder layers; heads innermost.
    pub fn index(&self, addr: HeadAddress) -> Result<usize> {
        let layers = match addr.region {
            Region::EncoderSelf => self.enc_layers,
            Region::DecoderCross => self.dec_layers,
        };
        if addr.layer >= layers || addr.head >= self.heads {
            bail!(Argument, "no gated head {} in a {}+{} layer x {} head model", addr, self.enc_layers, self.dec_layers, self.heads);
        }
        let base = match addr.region {
            Region::EncoderSelf => 0,
            Region::DecoderCross => self.enc_layers * self.heads,
        };
        Ok(base + addr.layer * self.heads + addr.head)
    }

    pub fn address(&self, index: usize) -> HeadAddress {
        let enc = self.enc_layers * self.heads;
        if index < enc {
            HeadAddress::new(Region::EncoderSelf, index / self.heads, index % self.heads)
        } else {
            let i = index - enc;
            HeadAddress::new(Region::DecoderCross, i / self.heads, i % self.heads)
        }
    }

    pub fn addresses(&self) -> impl Iterator<Item = HeadAddress> + '_ {
        (0..self.len()).map(|i| self.address(i))
    }
}

/// Trainable Hard-Concrete parameters, one `log α` per gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardConcreteParams {
    pub log_alpha: Vec<f64>,
    pub beta: f64,
    pub epsilon: f64,
    pub lambda: f64,
}

/// One batch's gate draws together with the uniforms that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSample {
    pub values: Vec<f64>,
    pub uniforms: Vec<f64>,
}

impl HardConcreteParams {
    pub fn new(n: usize, lambda: f64) -> Result<Self> {
        let p = HardConcreteParams { log_alpha: alloc::vec![DEFAULT_LOG_ALPHA; n], beta: DEFAULT_BETA, epsilon: DEFAULT_EPSILON, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            bail!(Argument, "beta {} outside (0, 1]", self.beta);
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            bail!(Argument, "epsilon {} must be positive", self.epsilon);
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bail!(Argument, "lambda {} must be non-negative", self.lambda);
        }
        if self.log_alpha.iter().any(|v| !v.is_finite()) {
            bail!(Argument, "non-finite log_alpha");
        }
        Ok(())
    }

    fn stretch(&self, s: f64) -> f64 {
        s * (1.0 + 2.0 * self.epsilon) - self.epsilon
    }

    /// `β · ln(ε / (1 + ε))`, the shift inside the non-zero probability.
    fn penalty_shift(&self) -> f64 {
        self.beta * libm::log(self.epsilon / (1.0 + self.epsilon))
    }

    /// Gate value for a given uniform draw `u ∈ (0, 1)`.
    pub fn gate_for(&self, index: usize, u: f64) -> f64 {
        let s = sigmoid((libm::log(u) - libm::log(1.0 - u) + self.log_alpha[index]) / self.beta);
        self.stretch(s).clamp(0.0, 1.0)
    }

    /// Draws every gate once; uniforms of exactly 0 or 1 are redrawn.
    pub fn sample(&self, rng: &mut Rng) -> GateSample {
        let uniforms: Vec<f64> = (0..self.log_alpha.len()).map(|_| rng.open_uniform()).collect();
        self.sample_with(&uniforms)
    }

    pub fn sample_with(&self, uniforms: &[f64]) -> GateSample {
        let values = uniforms.iter().enumerate().map(|(i, &u)| self.gate_for(i, u)).collect();
        GateSample { values, uniforms: uniforms.to_vec() }
    }

    /// `P(g_i > 0)` for each gate.
    pub fn nonzero_probabilities(&self) -> Vec<f64> {
        let shift = self.penalty_shift();
        self.log_alpha.iter().map(|&a| sigmoid(a - shift)).collect()
    }

    /// Expected number of non-zero gates.
    pub fn expected_l0_penalty(&self) -> f64 {
        self.nonzero_probabilities().iter().sum()
    }

    /// `∂ penalty / ∂ log α_i`.
    pub fn penalty_gradient(&self) -> Vec<f64> {
        self.nonzero_probabilities().iter().map(|p| p * (1.0 - p)).collect()
    }

    /// Deterministic inference-time gates, clamped so exact 0 and 1 are reachable.
    pub fn infer(&self) -> Vec<f64> {
        self.log_alpha.iter().map(|&a| self.stretch(sigmoid(a)).clamp(0.0, 1.0)).collect()
    }

    /// Reparameterized `∂ loss / ∂ log α` for one sampled batch.
    ///
    /// `upstream[i]` is `∂ task loss / ∂ g_i`. The pathwise term vanishes
    /// wherever the clamp was active; `λ ×` the penalty derivative is added on
    /// every gate.
    pub fn gate_gradient(&self, sample: &GateSample, upstream: &[f64]) -> Result<Vec<f64>> {
        let n = self.log_alpha.len();
        if sample.uniforms.len() != n || upstream.len() != n {
            bail!(Argument, "gate gradient expects {} gates", n);
        }
        let penalty = self.penalty_gradient();
        let out = (0..n)
            .map(|i| {
                let u = sample.uniforms[i];
                let s = sigmoid((libm::log(u) - libm::log(1.0 - u) + self.log_alpha[i]) / self.beta);
                let stretched = self.stretch(s);
                let pathwise = if stretched > 0.0 && stretched < 1.0 {
                    upstream[i] * (1.0 + 2.0 * self.epsilon) * s * (1.0 - s) / self.beta
                } else {
                    0.0
                };
                pathwise + self.lambda * penalty[i]
            })
            .collect();
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateMode {
    Binary,
    HardConcreteTraining,
    InferredFixed,
}

impl GateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GateMode::Binary => "binary",
            GateMode::HardConcreteTraining => "hard-concrete-training",
            GateMode::InferredFixed => "inferred-fixed",
        }
    }
}

/// Gate state for every gated head of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSet {
    mode: GateMode,
    layout: GateLayout,
    values: Vec<f64>,
    params: Option<HardConcreteParams>,
}

impl GateSet {
    /// Binary set with every head switched on.
    pub fn all_open(layout: GateLayout) -> Self {
        GateSet { mode: GateMode::Binary, layout, values: alloc::vec![1.0; layout.len()], params: None }
    }

    /// Hard-Concrete training set; values hold the latest sample.
    pub fn hard_concrete(layout: GateLayout, params: HardConcreteParams) -> Result<Self> {
        params.validate()?;
        if params.log_alpha.len() != layout.len() {
            bail!(Argument, "{} log_alpha values for {} gates", params.log_alpha.len(), layout.len());
        }
        let values = params.infer();
        Ok(GateSet { mode: GateMode::HardConcreteTraining, layout, values, params: Some(params) })
    }

    /// Fixed gates inferred from trained parameters.
    pub fn inferred(layout: GateLayout, params: HardConcreteParams) -> Result<Self> {
        let mut set = GateSet::hard_concrete(layout, params)?;
        set.mode = GateMode::InferredFixed;
        Ok(set)
    }

    /// Rebuilds a set from stored parts, checking the mode's value range.
    pub fn from_parts(mode: GateMode, layout: GateLayout, values: Vec<f64>, params: Option<HardConcreteParams>) -> Result<Self> {
        if values.len() != layout.len() {
            bail!(Argument, "{} gate values for {} gates", values.len(), layout.len());
        }
        match mode {
            GateMode::Binary if values.iter().any(|&v| v != 0.0 && v != 1.0) => {
                bail!(Argument, "binary gates must be 0 or 1")
            }
            _ if values.iter().any(|v| !(0.0..=1.0).contains(v)) => bail!(Argument, "gate values must lie in [0, 1]"),
            GateMode::HardConcreteTraining if params.is_none() => {
                bail!(Argument, "hard-concrete gates need parameters")
            }
            _ => {}
        }
        if let Some(p) = &params {
            p.validate()?;
            if p.log_alpha.len() != layout.len() {
                bail!(Argument, "{} log_alpha values for {} gates", p.log_alpha.len(), layout.len());
            }
        }
        Ok(GateSet { mode, layout, values, params })
    }

    pub fn mode(&self) -> GateMode {
        self.mode
    }

    pub fn layout(&self) -> GateLayout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn params(&self) -> Option<&HardConcreteParams> {
        self.params.as_ref()
    }

    pub fn params_mut(&mut self) -> Option<&mut HardConcreteParams> {
        self.params.as_mut()
    }

    pub fn value(&self, addr: HeadAddress) -> Result<f64> {
        Ok(self.values[self.layout.index(addr)?])
    }

    /// Installs one batch's sampled values.
    pub fn set_sample(&mut self, sample: &GateSample) -> Result<()> {
        if self.mode != GateMode::HardConcreteTraining {
            bail!(Argument, "sampling requires hard-concrete training gates, have {}", self.mode.as_str());
        }
        if sample.values.len() != self.values.len() {
            bail!(Argument, "sample has {} gates, set has {}", sample.values.len(), self.values.len());
        }
        self.values.clone_from(&sample.values);
        Ok(())
    }

    /// Freezes trained parameters into inference gates.
    pub fn to_inferred(&self) -> Result<GateSet> {
        match &self.params {
            Some(p) => GateSet::inferred(self.layout, p.clone()),
            None => Ok(self.clone()),
        }
    }

    /// Copy with one binary gate switched to `on`.
    pub fn set_binary_gate(&self, addr: HeadAddress, on: bool) -> Result<GateSet> {
        if self.mode != GateMode::Binary {
            bail!(Argument, "set_binary_gate on {} gates", self.mode.as_str());
        }
        let i = self.layout.index(addr)?;
        let mut out = self.clone();
        out.values[i] = if on { 1.0 } else { 0.0 };
        Ok(out)
    }

    /// Copy with one head forced to 0, for any inference mode.
    pub fn ablated(&self, addr: HeadAddress) -> Result<GateSet> {
        if self.mode == GateMode::HardConcreteTraining {
            bail!(Argument, "cannot ablate gates that are being trained");
        }
        let i = self.layout.index(addr)?;
        let mut out = self.clone();
        out.values[i] = 0.0;
        Ok(out)
    }

    /// Heads whose gate is exactly zero, per region.
    pub fn pruned_counts(&self) -> (usize, usize) {
        let mut counts = (0, 0);
        for (i, &v) in self.values.iter().enumerate() {
            if v == 0.0 {
                match self.layout.address(i).region {
                    Region::EncoderSelf => counts.0 += 1,
                    Region::DecoderCross => counts.1 += 1,
                }
            }
        }
        counts
    }
}
