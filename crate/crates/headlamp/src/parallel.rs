//! Document-parallel helpers. Work is split across a rayon pool sized by
//! `HEADLAMP_THREADS`; results are always collected in input order, so
//! output does not depend on the thread count.

use headlamp_core::corpus::TaggedDocument;
use headlamp_core::evalstats::{ablation_result, rouge1_per_doc, task_metrics, AblationResult, TaskMetrics};
use headlamp_core::gating::{GateSet, HeadAddress};
use headlamp_core::model::{AttentionRecord, EncodedExample, ExampleGradients, Model};
use headlamp_core::training::GradientMap;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const THREADS_VAR: &str = "HEADLAMP_THREADS";

/// Thread cap from `HEADLAMP_THREADS`, defaulting to the available cores.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Debug)]
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {threads} threads: {e}")))?;
        Ok(Pool { pool })
    }

    pub fn from_env() -> Result<Self> {
        Pool::new(thread_count()?)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    fn map<T: Sync, U: Send>(&self, items: &[T], f: impl Fn(usize, &T) -> U + Sync + Send) -> Vec<U> {
        self.pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect())
    }

    pub fn decode_all(&self, model: &Model, gates: &GateSet, docs: &[TaggedDocument]) -> Result<Vec<Vec<String>>> {
        self.map(docs, |i, d| {
            model.decode(gates, d, false).map(|o| o.tokens).map_err(|e| headlamp_core::Error::Data(format!("document {i}: {e}")))
        })
        .into_iter()
        .map(|r| r.map_err(Error::from))
        .collect()
    }

    /// Greedy-decodes every document with tracing on.
    pub fn trace_all(&self, model: &Model, gates: &GateSet, docs: &[TaggedDocument]) -> Result<Vec<Vec<AttentionRecord>>> {
        self.map(docs, |_, d| model.decode(gates, d, true).map(|o| o.records)).into_iter().map(|r| r.map_err(Error::from)).collect()
    }

    pub fn evaluate(&self, model: &Model, gates: &GateSet, docs: &[TaggedDocument]) -> Result<TaskMetrics> {
        Ok(task_metrics(&self.decode_all(model, gates, docs)?, docs))
    }

    /// Parallel counterpart of the sequential ablation harness; identical output.
    pub fn ablate_heads(
        &self,
        model: &Model,
        gates: &GateSet,
        docs: &[TaggedDocument],
        heads: &[HeadAddress],
        alpha: f64,
    ) -> Result<Vec<AblationResult>> {
        let intact = rouge1_per_doc(&self.decode_all(model, gates, docs)?, docs);
        heads
            .iter()
            .map(|&h| {
                let ablated_gates = gates.ablated(h)?;
                let ablated = rouge1_per_doc(&self.decode_all(model, &ablated_gates, docs)?, docs);
                Ok(ablation_result(h, &intact, &ablated, alpha)?)
            })
            .collect()
    }
}

impl GradientMap for Pool {
    fn gradients(&self, model: &Model, gates: &GateSet, batch: &[&EncodedExample]) -> Vec<headlamp_core::Result<ExampleGradients>> {
        self.map(batch, |_, ex| model.gradients(gates, ex))
    }
}
