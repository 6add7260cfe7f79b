use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::activations::ActivationKind;
use crate::autodiff::{Graph, Var};
use crate::corpus::TaggedDocument;
use crate::error::{bail, Result};
use crate::gating::{GateSet, HeadAddress, Region};
use crate::tensor::Tensor;

use super::params::{layout, AttentionIdx, FeedForwardIdx, Layout, NormIdx};
use super::{copy_head, positional_encoding, AttentionRecord, EncodedExample, ModelConfig, Params, Vocab, BOS, EOS, UNK};

/// Floor applied to `P_v(w*)` before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// The summarizer: configuration, vocabulary and parameters.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    vocab: Vocab,
    params: Params,
    layout: Layout,
}

/// Teacher-forced pass over one example.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// `steps × extended vocabulary` distributions.
    pub step_probs: Tensor,
    /// Mean cross-entropy of the targets.
    pub loss: f64,
    pub records: Vec<AttentionRecord>,
}

/// Greedy decode of one document.
#[derive(Clone, Debug)]
pub struct DecodeOutput {
    pub tokens: Vec<String>,
    /// Extended-vocabulary ids, `<eos>` excluded.
    pub ids: Vec<usize>,
    /// Encoder self-attention and decoder cross-attention of the final pass.
    pub records: Vec<AttentionRecord>,
}

/// Per-example gradients.
#[derive(Clone, Debug)]
pub struct ExampleGradients {
    pub loss: f64,
    pub params: Vec<Tensor>,
    /// `∂ loss / ∂ g` for every gated head, in gate-layout order.
    pub gates: Vec<f64>,
}

impl Model {
    pub fn new(config: ModelConfig, vocab: Vocab) -> Result<Self> {
        let params = Params::init(&ModelConfig { vocab_size: vocab.len(), ..config.clone() });
        Model::from_parts(ModelConfig { vocab_size: vocab.len(), ..config }, vocab, params)
    }

    pub fn from_parts(config: ModelConfig, vocab: Vocab, params: Params) -> Result<Self> {
        config.validate()?;
        if config.vocab_size != vocab.len() {
            bail!(Config, "config vocab_size {} but vocabulary has {}", config.vocab_size, vocab.len());
        }
        let template = Params::init(&ModelConfig { seed: 0, ..config.clone() });
        let named = params.names().iter().cloned().zip(params.tensors().iter().cloned()).collect();
        let params = Params::from_named(&template, named)?;
        let layout = layout(&config);
        Ok(Model { config, vocab, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Params) -> Result<()> {
        let named = params.names().iter().cloned().zip(params.tensors().iter().cloned()).collect();
        self.params = Params::from_named(&self.params, named)?;
        Ok(())
    }

    /// Switches the activation plan, keeping the parameters.
    pub fn with_plan(mut self, plan: super::ActivationPlan) -> Self {
        self.config.activation_plan = plan;
        self
    }

    pub fn encode(&self, doc: &TaggedDocument) -> Result<EncodedExample> {
        if doc.tokens.len() > self.config.max_src_len {
            bail!(Argument, "source of {} tokens exceeds max_src_len {}", doc.tokens.len(), self.config.max_src_len);
        }
        self.vocab.encode(doc, self.config.max_src_len, self.config.max_tgt_len)
    }

    fn check_gates(&self, gates: &GateSet) -> Result<()> {
        if gates.layout() != self.config.gate_layout() {
            bail!(Config, "gate layout {:?} does not match the model", gates.layout());
        }
        Ok(())
    }

    /// Teacher-forced distributions and loss.
    pub fn teacher_forced(&self, gates: &GateSet, ex: &EncodedExample, trace: bool) -> Result<StepOutput> {
        self.check_gates(gates)?;
        let mut pass = Pass::new(self, gates.values(), trace);
        let (_, probs, loss) = pass.full(ex)?;
        Ok(StepOutput { step_probs: pass.graph.value(probs).clone(), loss: pass.graph.value(loss).data()[0], records: pass.records })
    }

    /// Loss and its gradient with respect to every parameter and gate.
    pub fn gradients(&self, gates: &GateSet, ex: &EncodedExample) -> Result<ExampleGradients> {
        self.check_gates(gates)?;
        let mut pass = Pass::new(self, gates.values(), false);
        let (_, _, loss) = pass.full(ex)?;
        let mut grads = pass.graph.backward(loss);
        let params = pass
            .param_vars
            .iter()
            .zip(self.params.tensors())
            .map(|(v, t)| v.and_then(|v| grads.take(v)).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect();
        let gate_grads = pass.gate_vars.iter().map(|v| v.and_then(|v| grads.get(v)).map_or(0.0, |t| t.data()[0])).collect();
        Ok(ExampleGradients { loss: pass.graph.value(loss).data()[0], params, gates: gate_grads })
    }

    /// Greedy decode up to `max_tgt_len` steps or `<eos>`.
    pub fn decode(&self, gates: &GateSet, doc: &TaggedDocument, trace: bool) -> Result<DecodeOutput> {
        self.check_gates(gates)?;
        let ex = self.encode(doc)?;
        let mut enc_pass = Pass::new(self, gates.values(), trace);
        let enc_out = enc_pass.encoder(&ex.source_ids)?;
        let memory = enc_pass.graph.value(enc_out).clone();
        let mut records = enc_pass.records;
        let ext = ex.extended_size(self.vocab.len());
        let mut inputs = vec![BOS];
        let mut ids = Vec::new();
        let mut last_records = Vec::new();
        for _ in 0..self.config.max_tgt_len {
            let mut pass = Pass::new(self, gates.values(), trace);
            let mem = pass.graph.leaf(memory.clone());
            let probs = pass.decoder(mem, &inputs, &ex)?;
            let p = pass.graph.value(probs);
            let last = p.row_slice(p.rows() - 1);
            debug_assert_eq!(last.len(), ext);
            let next = argmax(last);
            last_records = pass.records;
            if next == EOS {
                break;
            }
            ids.push(next);
            inputs.push(if next >= self.vocab.len() { UNK } else { next });
        }
        records.extend(last_records);
        let tokens = ids.iter().map(|&id| self.token_for(id, &ex)).collect();
        Ok(DecodeOutput { tokens, ids, records })
    }

    /// Makes head `to` an exact duplicate of head `from` in the same gated
    /// block. The output projection of `from` is split evenly across both, so
    /// the pair computes what `from` alone did and either copy is redundant.
    pub fn tie_heads(&mut self, region: Region, layer: usize, from: usize, to: usize) -> Result<()> {
        let c = &self.config;
        let layers = match region {
            Region::EncoderSelf => c.enc_layers,
            Region::DecoderCross => c.dec_layers,
        };
        if layer >= layers || from >= c.heads_per_layer || to >= c.heads_per_layer || from == to {
            bail!(Argument, "cannot tie heads {} and {} of {} layer {}", from, to, region, layer);
        }
        let idx = match region {
            Region::EncoderSelf => self.layout.encoder[layer].attn.clone(),
            Region::DecoderCross => self.layout.decoder[layer].cross_attn.clone(),
        };
        let hd = c.head_dim;
        let tensors = self.params.tensors_mut();
        for w in [&idx.wq, &idx.wk, &idx.wv] {
            tensors[w[to]] = tensors[w[from]].clone();
        }
        let wo = &mut tensors[idx.wo];
        for r in 0..hd {
            let half: Vec<f64> = wo.row_slice(from * hd + r).iter().map(|v| v * 0.5).collect();
            wo.row_slice_mut(from * hd + r).copy_from_slice(&half);
            wo.row_slice_mut(to * hd + r).copy_from_slice(&half);
        }
        Ok(())
    }

    fn token_for(&self, id: usize, ex: &EncodedExample) -> String {
        match self.vocab.token(id) {
            Some(t) => String::from(t),
            None => ex.oov[id - self.vocab.len()].clone(),
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// One forward pass recorded on a fresh tape.
struct Pass<'a> {
    model: &'a Model,
    graph: Graph,
    param_vars: Vec<Option<Var>>,
    gate_values: &'a [f64],
    gate_vars: Vec<Option<Var>>,
    trace: bool,
    records: Vec<AttentionRecord>,
}

impl<'a> Pass<'a> {
    fn new(model: &'a Model, gate_values: &'a [f64], trace: bool) -> Self {
        Pass {
            model,
            graph: Graph::new(),
            param_vars: vec![None; model.params.len()],
            gate_values,
            gate_vars: vec![None; gate_values.len()],
            trace,
            records: Vec::new(),
        }
    }

    fn param(&mut self, idx: usize) -> Var {
        if let Some(v) = self.param_vars[idx] {
            return v;
        }
        let v = self.graph.leaf(self.model.params.tensors()[idx].clone());
        self.param_vars[idx] = Some(v);
        v
    }

    fn gate(&mut self, addr: HeadAddress) -> Result<Var> {
        let i = self.model.config.gate_layout().index(addr)?;
        if let Some(v) = self.gate_vars[i] {
            return Ok(v);
        }
        let v = self.graph.leaf(Tensor::scalar(self.gate_values[i]));
        self.gate_vars[i] = Some(v);
        Ok(v)
    }

    fn linear(&mut self, x: Var, w: usize, b: usize) -> Result<Var> {
        let (w, b) = (self.param(w), self.param(b));
        let h = self.graph.matmul(x, w)?;
        self.graph.add_row(h, b)
    }

    fn norm(&mut self, x: Var, n: NormIdx) -> Result<Var> {
        let (g, b) = (self.param(n.gain), self.param(n.bias));
        self.graph.layer_norm(x, g, b)
    }

    fn feed_forward(&mut self, x: Var, ff: FeedForwardIdx) -> Result<Var> {
        let h = self.linear(x, ff.w1, ff.b1)?;
        let h = self.graph.relu(h);
        self.linear(h, ff.w2, ff.b2)
    }

    fn embed(&mut self, ids: &[usize]) -> Result<Var> {
        let table = self.param(self.model.layout.embed);
        let x = self.graph.gather(table, ids)?;
        let pe = self.graph.leaf(positional_encoding(ids.len(), self.model.config.model_dim));
        self.graph.add(x, pe)
    }

    /// Gated multi-head attention. `region = None` marks the ungated, causal
    /// decoder self-attention. Returns the block output and per-head weights.
    fn multi_head(&mut self, xq: Var, xkv: Var, idx: &AttentionIdx, layer: usize, region: Option<Region>) -> Result<(Var, Vec<Var>)> {
        let c = &self.model.config;
        let heads = c.heads_per_layer;
        let scale = 1.0 / libm::sqrt(c.head_dim as f64);
        let (plan, dec_layers) = (c.activation_plan, c.dec_layers);
        let mut contexts = Vec::with_capacity(heads);
        let mut weights = Vec::with_capacity(heads);
        for h in 0..heads {
            let (wq, wk, wv) = (self.param(idx.wq[h]), self.param(idx.wk[h]), self.param(idx.wv[h]));
            let q = self.graph.matmul(xq, wq)?;
            let k = self.graph.matmul(xkv, wk)?;
            let v = self.graph.matmul(xkv, wv)?;
            let scores = self.graph.matmul_bt(q, k)?;
            let scores = self.graph.scale(scores, scale);
            let addr = region.map(|r| HeadAddress::new(r, layer, h));
            let kind = addr.map_or(ActivationKind::Softmax, |a| plan.kind(a, dec_layers));
            let w = self.graph.attention(scores, kind, region.is_none())?;
            let ctx = self.graph.matmul(w, v)?;
            let ctx = match addr {
                Some(a) => {
                    let g = self.gate(a)?;
                    if self.graph.value(g).data()[0] == 0.0 {
                        // A closed gate removes the head entirely.
                        let shape = self.graph.value(ctx).shape().to_vec();
                        self.graph.leaf(Tensor::zeros(&shape))
                    } else {
                        self.graph.scale_by(ctx, g)?
                    }
                }
                None => ctx,
            };
            if let (true, Some(a)) = (self.trace, addr) {
                self.records.push(AttentionRecord::new(a, self.graph.value(w).clone())?);
            }
            contexts.push(ctx);
            weights.push(w);
        }
        let cat = self.graph.concat(&contexts)?;
        let out = self.linear(cat, idx.wo, idx.bo)?;
        Ok((out, weights))
    }

    fn encoder(&mut self, source_ids: &[usize]) -> Result<Var> {
        if source_ids.is_empty() {
            bail!(Argument, "empty source");
        }
        let mut x = self.embed(source_ids)?;
        for l in 0..self.model.config.enc_layers {
            let layer = self.model.layout.encoder[l].clone();
            let h = self.norm(x, layer.norm_attn)?;
            let (a, _) = self.multi_head(h, h, &layer.attn, l, Some(Region::EncoderSelf))?;
            x = self.graph.add(x, a)?;
            let h = self.norm(x, layer.norm_ff)?;
            let f = self.feed_forward(h, layer.ff)?;
            x = self.graph.add(x, f)?;
        }
        self.norm(x, self.model.layout.enc_norm)
    }

    /// Decoder over `inputs`; returns the copy-mixture distributions.
    fn decoder(&mut self, memory: Var, inputs: &[usize], ex: &EncodedExample) -> Result<Var> {
        let c = self.model.config.clone();
        let mut y = self.embed(inputs)?;
        let mut copy = None;
        for l in 0..c.dec_layers {
            let layer = self.model.layout.decoder[l].clone();
            let h = self.norm(y, layer.norm_self)?;
            let (a, _) = self.multi_head(h, h, &layer.self_attn, l, None)?;
            y = self.graph.add(y, a)?;
            let h = self.norm(y, layer.norm_cross)?;
            let (a, weights) = self.multi_head(h, memory, &layer.cross_attn, l, Some(Region::DecoderCross))?;
            if l + 1 == c.dec_layers {
                copy = Some(weights[copy_head(c.dec_layers).head]);
            }
            y = self.graph.add(y, a)?;
            let h = self.norm(y, layer.norm_ff)?;
            let f = self.feed_forward(h, layer.ff)?;
            y = self.graph.add(y, f)?;
        }
        let out = self.norm(y, self.model.layout.dec_norm)?;
        let logits = self.linear(out, self.model.layout.out_w, self.model.layout.out_b)?;
        let gen = self.linear(out, self.model.layout.gen_w, self.model.layout.gen_b)?;
        let p_gen = self.graph.sigmoid(gen);
        let gate = self.gate(copy_head(c.dec_layers))?;
        let copy = copy.expect("decoder has at least one layer");
        let ext = ex.extended_size(self.model.vocab.len());
        self.graph.copy_mixture(logits, copy, p_gen, gate, &ex.source_ext, ext)
    }

    /// Teacher-forced pass: (encoder output, distributions, loss).
    fn full(&mut self, ex: &EncodedExample) -> Result<(Var, Var, Var)> {
        let memory = self.encoder(&ex.source_ids)?;
        let probs = self.decoder(memory, &ex.target_in, ex)?;
        let loss = self.graph.nll(probs, &ex.target_out, PROB_FLOOR)?;
        Ok((memory, probs, loss))
    }
}
