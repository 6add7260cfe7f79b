//! Gradient training with optional Hard-Concrete gates, pruning and λ sweeps.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::TaggedDocument;
use crate::error::{bail, Error, Result};
use crate::evalstats::{evaluate, TaskMetrics};
use crate::gating::{GateMode, GateSet, HardConcreteParams};
use crate::model::{EncodedExample, ExampleGradients, Model, Params, PROB_FLOOR};
use crate::tensor::{Rng, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Plain gradient descent.
    Sgd,
    /// Adam with the usual moment decays (0.9, 0.999).
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the expected-L0 penalty.
    pub lambda: f64,
    pub learning_rate: f64,
    /// Step size for `log α`; defaults to `learning_rate` when absent.
    pub gate_learning_rate: Option<f64>,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Global gradient-norm clip.
    pub grad_clip: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.0,
            learning_rate: 3e-3,
            gate_learning_rate: Some(0.05),
            batch_size: 8,
            max_steps: 400,
            seed: 0,
            grad_clip: 1.0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bail!(Config, "lambda {} must be a finite non-negative number", self.lambda);
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.learning_rate) || !self.gate_learning_rate.is_none_or(positive) {
            bail!(Config, "learning rates must be positive");
        }
        if !positive(self.grad_clip) {
            bail!(Config, "grad_clip {} must be positive", self.grad_clip);
        }
        if self.batch_size == 0 {
            bail!(Config, "batch_size must be at least 1");
        }
        Ok(())
    }
}

/// One row of the loss curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub cross_entropy: f64,
    pub l0_penalty: f64,
    pub total: f64,
}

/// Mean cross-entropy of `targets` under `step_probs` plus `λ ×` the expected
/// L0 penalty when Hard-Concrete parameters are given.
pub fn summarization_loss(step_probs: &Tensor, targets: &[usize], gates: Option<&HardConcreteParams>, lambda: f64) -> Result<f64> {
    if targets.is_empty() || step_probs.rows() != targets.len() {
        bail!(Argument, "{} targets for {} steps", targets.len(), step_probs.rows());
    }
    let mut ce = 0.0;
    for (t, &w) in targets.iter().enumerate() {
        if w >= step_probs.cols() {
            bail!(Data, "target {} outside the extended vocabulary of {}", w, step_probs.cols());
        }
        ce -= libm::log(step_probs.at(t, w).max(PROB_FLOOR));
    }
    let ce = ce / targets.len() as f64;
    Ok(match gates {
        Some(p) => ce + lambda * p.expected_l0_penalty(),
        None => ce,
    })
}

/// Computes per-example gradients for a batch. Implementations may run the
/// examples in parallel; results must come back in input order.
pub trait GradientMap {
    fn gradients(&self, model: &Model, gates: &GateSet, batch: &[&EncodedExample]) -> Vec<Result<ExampleGradients>>;
}

/// Runs examples one after another.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl GradientMap for Sequential {
    fn gradients(&self, model: &Model, gates: &GateSet, batch: &[&EncodedExample]) -> Vec<Result<ExampleGradients>> {
        batch.iter().map(|ex| model.gradients(gates, ex)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    /// Final gates: trained Hard-Concrete gates are returned inferred.
    pub gates: GateSet,
    pub curve: Vec<LossRecord>,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, values: &mut [f64], grads: &[f64], lr: f64, offset: usize) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let c1 = 1.0 - libm::pow(B1, self.t as f64);
        let c2 = 1.0 - libm::pow(B2, self.t as f64);
        for (i, (x, &g)) in values.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[offset + i], &mut self.v[offset + i]);
            *m = B1 * *m + (1.0 - B1) * g;
            *v = B2 * *v + (1.0 - B2) * g * g;
            *x -= lr * (*m / c1) / (libm::sqrt(*v / c2) + EPS);
        }
    }
}

/// Trains with sequential per-example gradients.
pub fn train(model: Model, gates: GateSet, docs: &[TaggedDocument], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, gates, docs, config, &Sequential)
}

/// Trains `model` on `docs`. Hard-Concrete gates are re-sampled for every
/// batch and their `log α` are trained alongside the parameters; any other
/// gate set is held fixed.
pub fn train_with<M: GradientMap>(
    mut model: Model,
    mut gates: GateSet,
    docs: &[TaggedDocument],
    config: &TrainConfig,
    map: &M,
) -> Result<TrainOutcome> {
    config.validate()?;
    if docs.is_empty() {
        bail!(Argument, "empty training corpus");
    }
    let examples = docs.iter().map(|d| model.encode(d)).collect::<Result<Vec<_>>>()?;
    let gated = gates.mode() == GateMode::HardConcreteTraining;
    if let Some(p) = gates.params_mut() {
        p.lambda = config.lambda;
    }
    let mut root = Rng::new(config.seed);
    let mut order_rng = root.fork(1);
    let mut gate_rng = root.fork(2);
    let n_params = model.params().count();
    let n_gates = if gated { gates.layout().len() } else { 0 };
    let mut adam = AdamState::new(n_params + n_gates);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut cursor = order.len();
    let mut curve = Vec::with_capacity(config.max_steps);

    for step in 0..config.max_steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size.min(examples.len()) {
            if cursor == order.len() {
                order_rng.shuffle(&mut order);
                cursor = 0;
            }
            batch.push(&examples[order[cursor]]);
            cursor += 1;
        }
        let sample = if gated {
            let p = gates.params().expect("hard-concrete gates carry params");
            let s = p.sample(&mut gate_rng);
            gates.set_sample(&s)?;
            Some(s)
        } else {
            None
        };

        // Fixed-order reduction keeps results independent of the map's scheduling.
        let mut param_grads = model.params().zeros_like();
        let mut gate_upstream = vec![0.0; gates.layout().len()];
        let mut ce = 0.0;
        for result in map.gradients(&model, &gates, &batch) {
            let g = result?;
            ce += g.loss;
            for (acc, t) in param_grads.iter_mut().zip(&g.params) {
                acc.add_assign(t);
            }
            for (acc, v) in gate_upstream.iter_mut().zip(&g.gates) {
                *acc += v;
            }
        }
        let scale = 1.0 / batch.len() as f64;
        ce *= scale;
        for t in &mut param_grads {
            *t = t.scale(scale);
        }
        gate_upstream.iter_mut().for_each(|v| *v *= scale);

        let (l0, la_grads) = match (&sample, gates.params()) {
            (Some(s), Some(p)) => (p.expected_l0_penalty(), p.gate_gradient(s, &gate_upstream)?),
            _ => (0.0, Vec::new()),
        };
        let total = ce + config.lambda * l0;
        if !total.is_finite() {
            return Err(Error::Diverged { step });
        }
        curve.push(LossRecord { step, cross_entropy: ce, l0_penalty: l0, total });

        let sq: f64 = param_grads.iter().flat_map(|t| t.data()).chain(&la_grads).map(|g| g * g).sum();
        let norm = libm::sqrt(sq);
        if !norm.is_finite() {
            return Err(Error::Diverged { step });
        }
        let clip = if norm > config.grad_clip { config.grad_clip / norm } else { 1.0 };
        let lr = config.learning_rate;
        let gate_lr = config.gate_learning_rate.unwrap_or(lr);
        adam.t += 1;
        let mut offset = 0;
        for (p, g) in model.params_mut().tensors_mut().iter_mut().zip(&param_grads) {
            let n = p.len();
            match config.optimizer {
                Optimizer::Sgd => p.add_assign_scaled(g, -lr * clip),
                Optimizer::Adam => {
                    let clipped: Vec<f64> = g.data().iter().map(|v| v * clip).collect();
                    adam.step(p.data_mut(), &clipped, lr, offset);
                }
            }
            offset += n;
        }
        if let Some(p) = gates.params_mut() {
            let clipped: Vec<f64> = la_grads.iter().map(|v| v * clip).collect();
            match config.optimizer {
                Optimizer::Sgd => p.log_alpha.iter_mut().zip(&clipped).for_each(|(a, g)| *a -= gate_lr * g),
                Optimizer::Adam => adam.step(&mut p.log_alpha, &clipped, gate_lr, offset),
            }
        }
    }
    let gates = if gated { gates.to_inferred()? } else { gates };
    Ok(TrainOutcome { model, gates, curve })
}

/// Where pruning starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneStart {
    /// Continue from the given (λ = 0) parameters.
    FineTune,
    /// Re-initialize parameters from the model seed and train with gates from scratch.
    Fresh,
}

/// Trains Hard-Concrete gates (fresh `log α`) under `config.lambda` and
/// returns the inferred gates.
pub fn prune<M: GradientMap>(
    model: &Model,
    docs: &[TaggedDocument],
    config: &TrainConfig,
    start: PruneStart,
    map: &M,
) -> Result<TrainOutcome> {
    let layout = model.config().gate_layout();
    let gates = GateSet::hard_concrete(layout, HardConcreteParams::new(layout.len(), config.lambda)?)?;
    let start_model = match start {
        PruneStart::FineTune => model.clone(),
        PruneStart::Fresh => {
            let mut m = model.clone();
            m.set_params(Params::init(model.config()))?;
            m
        }
    };
    train_with(start_model, gates, docs, config, map)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub pruned_encoder: usize,
    pub pruned_decoder: usize,
    pub metrics: TaskMetrics,
    pub final_loss: Option<LossRecord>,
}

/// Prunes once per λ from the same starting model and seed, then evaluates
/// the inferred gates on `eval_docs`.
pub fn lambda_sweep<M: GradientMap>(
    model: &Model,
    train_docs: &[TaggedDocument],
    eval_docs: &[TaggedDocument],
    lambdas: &[f64],
    config: &TrainConfig,
    start: PruneStart,
    map: &M,
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() {
        bail!(Argument, "lambda sweep needs at least one value");
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let cfg = TrainConfig { lambda, ..config.clone() };
            let out = prune(model, train_docs, &cfg, start, map)?;
            let (pruned_encoder, pruned_decoder) = out.gates.pruned_counts();
            let metrics = evaluate(&out.model, &out.gates, eval_docs)?;
            Ok(SweepRow { lambda, pruned_encoder, pruned_decoder, metrics, final_loss: out.curve.last().copied() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        let perfect = Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(summarization_loss(&perfect, &[1, 0], None, 0.0).unwrap(), 0.0);
        let uniform = Tensor::full(&[3, 5], 0.2);
        let ce = summarization_loss(&uniform, &[0, 1, 4], None, 0.0).unwrap();
        assert!((ce - libm::log(5.0)).abs() < 1e-15);
        let mut p = HardConcreteParams::new(1, 1.0).unwrap();
        p.log_alpha[0] = 0.0;
        let total = summarization_loss(&uniform, &[0, 1, 4], Some(&p), 1.0).unwrap();
        assert!((total - ce - 0.8318).abs() < 1e-4);
        assert_eq!(summarization_loss(&uniform, &[0, 1, 4], Some(&p), 0.0).unwrap(), ce);
        assert!(summarization_loss(&uniform, &[0, 1, 5], None, 0.0).is_err());
        assert!(summarization_loss(&uniform, &[0, 1], None, 0.0).is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(TrainConfig { lambda: -1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { grad_clip: f64::NAN, ..TrainConfig::default() }.validate().is_err());
    }
}
