use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::{Rng, Tensor};

use super::ModelConfig;

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

#[derive(Clone, Debug)]
pub(crate) struct AttentionIdx {
    pub wq: Vec<usize>,
    pub wk: Vec<usize>,
    pub wv: Vec<usize>,
    pub wo: usize,
    pub bo: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct NormIdx {
    pub gain: usize,
    pub bias: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct FeedForwardIdx {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct EncoderLayerIdx {
    pub norm_attn: NormIdx,
    pub attn: AttentionIdx,
    pub norm_ff: NormIdx,
    pub ff: FeedForwardIdx,
}

#[derive(Clone, Debug)]
pub(crate) struct DecoderLayerIdx {
    pub norm_self: NormIdx,
    pub self_attn: AttentionIdx,
    pub norm_cross: NormIdx,
    pub cross_attn: AttentionIdx,
    pub norm_ff: NormIdx,
    pub ff: FeedForwardIdx,
}

/// Where each parameter lives inside [`Params`].
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub embed: usize,
    pub encoder: Vec<EncoderLayerIdx>,
    pub enc_norm: NormIdx,
    pub decoder: Vec<DecoderLayerIdx>,
    pub dec_norm: NormIdx,
    pub out_w: usize,
    pub out_b: usize,
    pub gen_w: usize,
    pub gen_b: usize,
}

enum Init {
    Zeros,
    Ones,
    Normal(f64),
}

struct Builder<'a> {
    rng: &'a mut Rng,
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl Builder<'_> {
    fn add(&mut self, name: String, shape: &[usize], init: Init) -> usize {
        let t = match init {
            Init::Zeros => Tensor::zeros(shape),
            Init::Ones => Tensor::full(shape, 1.0),
            Init::Normal(std) => Tensor::randn(shape, std, self.rng),
        };
        self.names.push(name);
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> usize {
        self.add(format!("{name}.w"), &[fan_in, fan_out], Init::Normal(1.0 / libm::sqrt(fan_in as f64)))
    }

    fn bias(&mut self, name: &str, n: usize) -> usize {
        self.add(format!("{name}.b"), &[1, n], Init::Zeros)
    }

    fn norm(&mut self, name: &str, n: usize) -> NormIdx {
        NormIdx {
            gain: self.add(format!("{name}.gain"), &[1, n], Init::Ones),
            bias: self.add(format!("{name}.bias"), &[1, n], Init::Zeros),
        }
    }

    fn attention(&mut self, name: &str, c: &ModelConfig) -> AttentionIdx {
        let mut idx = AttentionIdx { wq: Vec::new(), wk: Vec::new(), wv: Vec::new(), wo: 0, bo: 0 };
        for h in 0..c.heads_per_layer {
            idx.wq.push(self.linear(&format!("{name}.h{h}.q"), c.model_dim, c.head_dim));
            idx.wk.push(self.linear(&format!("{name}.h{h}.k"), c.model_dim, c.head_dim));
            idx.wv.push(self.linear(&format!("{name}.h{h}.v"), c.model_dim, c.head_dim));
        }
        idx.wo = self.linear(&format!("{name}.out"), c.model_dim, c.model_dim);
        idx.bo = self.bias(&format!("{name}.out"), c.model_dim);
        idx
    }

    fn feed_forward(&mut self, name: &str, c: &ModelConfig) -> FeedForwardIdx {
        FeedForwardIdx {
            w1: self.linear(&format!("{name}.ff1"), c.model_dim, c.ff_dim),
            b1: self.bias(&format!("{name}.ff1"), c.ff_dim),
            w2: self.linear(&format!("{name}.ff2"), c.ff_dim, c.model_dim),
            b2: self.bias(&format!("{name}.ff2"), c.model_dim),
        }
    }
}

fn build(c: &ModelConfig, rng: &mut Rng) -> (Layout, Params) {
    let mut b = Builder { rng, names: Vec::new(), tensors: Vec::new() };
    let embed = b.add("embed".into(), &[c.vocab_size, c.model_dim], Init::Normal(1.0));
    let encoder = (0..c.enc_layers)
        .map(|l| {
            let name = format!("enc{l}");
            EncoderLayerIdx {
                norm_attn: b.norm(&format!("{name}.norm_attn"), c.model_dim),
                attn: b.attention(&format!("{name}.self"), c),
                norm_ff: b.norm(&format!("{name}.norm_ff"), c.model_dim),
                ff: b.feed_forward(&name, c),
            }
        })
        .collect();
    let enc_norm = b.norm("enc.norm", c.model_dim);
    let decoder = (0..c.dec_layers)
        .map(|l| {
            let name = format!("dec{l}");
            DecoderLayerIdx {
                norm_self: b.norm(&format!("{name}.norm_self"), c.model_dim),
                self_attn: b.attention(&format!("{name}.self"), c),
                norm_cross: b.norm(&format!("{name}.norm_cross"), c.model_dim),
                cross_attn: b.attention(&format!("{name}.cross"), c),
                norm_ff: b.norm(&format!("{name}.norm_ff"), c.model_dim),
                ff: b.feed_forward(&name, c),
            }
        })
        .collect();
    let dec_norm = b.norm("dec.norm", c.model_dim);
    let out_w = b.linear("vocab", c.model_dim, c.vocab_size);
    let out_b = b.bias("vocab", c.vocab_size);
    let gen_w = b.linear("p_gen", c.model_dim, 1);
    let gen_b = b.bias("p_gen", 1);
    let layout = Layout { embed, encoder, enc_norm, decoder, dec_norm, out_w, out_b, gen_w, gen_b };
    (layout, Params { names: b.names, tensors: b.tensors })
}

pub(crate) fn layout(c: &ModelConfig) -> Layout {
    // Shapes are seed-independent; only the layout is kept.
    build(c, &mut Rng::new(0)).0
}

impl Params {
    /// Fresh parameters drawn from `config.seed`.
    pub fn init(config: &ModelConfig) -> Self {
        build(config, &mut Rng::new(config.seed)).1
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Replaces all tensors, requiring identical names and shapes to `template`.
    pub fn from_named(template: &Params, named: Vec<(String, Tensor)>) -> Result<Params> {
        if named.len() != template.len() {
            bail!(Config, "expected {} parameter tensors, got {}", template.len(), named.len());
        }
        let mut tensors = Vec::with_capacity(named.len());
        for ((name, t), (want, shape)) in named.into_iter().zip(template.names.iter().zip(&template.tensors)) {
            if &name != want || t.shape() != shape.shape() {
                bail!(Config, "parameter {} {:?} does not match {} {:?}", name, t.shape(), want, shape.shape());
            }
            tensors.push(t);
        }
        Ok(Params { names: template.names.clone(), tensors })
    }

    /// All values in one flat row.
    pub fn flatten(&self) -> Tensor {
        let data: Vec<f64> = self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect();
        let n = data.len();
        Tensor::from_parts(alloc::vec![1, n], data)
    }

    /// Inverse of [`Params::flatten`].
    pub fn unflatten(&self, flat: &Tensor) -> Result<Params> {
        if flat.len() != self.count() {
            bail!(Shape, "{} values for {} parameters", flat.len(), self.count());
        }
        let mut out = self.clone();
        let mut offset = 0;
        for t in &mut out.tensors {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat.data()[offset..offset + n]);
            offset += n;
        }
        Ok(out)
    }

    pub(crate) fn zeros_like(&self) -> Vec<Tensor> {
        self.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect()
    }
}
