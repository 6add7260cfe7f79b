use headlamp_core::corpus::{generate, CorpusSpec, TaggedDocument};
use headlamp_core::gating::{GateMode, GateSet, HardConcreteParams};
use headlamp_core::model::{ActivationPlan, Model, ModelConfig, Vocab};
use headlamp_core::training::{lambda_sweep, prune, train, Optimizer, PruneStart, Sequential, TrainConfig};

fn setup() -> (Model, Vec<TaggedDocument>) {
    let docs = generate(&CorpusSpec { n_docs: 24, src_len_min: 4, src_len_max: 6, oov_rate: 0.2, ..Default::default() }).unwrap();
    let vocab = Vocab::build(&docs, 60, 2).unwrap();
    let cfg = ModelConfig {
        enc_layers: 1,
        dec_layers: 1,
        heads_per_layer: 2,
        head_dim: 4,
        model_dim: 8,
        ff_dim: 16,
        max_tgt_len: 10,
        activation_plan: ActivationPlan::Dense,
        ..Default::default()
    };
    (Model::new(cfg, vocab).unwrap(), docs)
}

fn short(steps: usize) -> TrainConfig {
    TrainConfig { max_steps: steps, batch_size: 4, ..Default::default() }
}

fn gated(model: &Model, lambda: f64) -> GateSet {
    let layout = model.config().gate_layout();
    GateSet::hard_concrete(layout, HardConcreteParams::new(layout.len(), lambda).unwrap()).unwrap()
}

fn flat(model: &Model) -> Vec<u64> {
    model.params().tensors().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect()
}

#[test]
fn same_seed_gives_bit_identical_runs() {
    let (model, docs) = setup();
    let cfg = TrainConfig { lambda: 0.1, ..short(15) };
    let a = train(model.clone(), gated(&model, 0.1), &docs, &cfg).unwrap();
    let b = train(model.clone(), gated(&model, 0.1), &docs, &cfg).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(flat(&a.model), flat(&b.model));
    assert_eq!(a.gates, b.gates);

    let c = train(model.clone(), gated(&model, 0.1), &docs, &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.curve, c.curve);
}

#[test]
fn zero_lambda_objective_is_the_cross_entropy() {
    let (model, docs) = setup();
    let out = train(model.clone(), gated(&model, 0.0), &docs, &short(5)).unwrap();
    for r in &out.curve {
        assert_eq!(r.total, r.cross_entropy);
        assert!(r.l0_penalty > 0.0);
    }
    let fixed = train(model.clone(), GateSet::all_open(model.config().gate_layout()), &docs, &short(5)).unwrap();
    assert!(fixed.curve.iter().all(|r| r.l0_penalty == 0.0 && r.total == r.cross_entropy));
    assert_eq!(fixed.gates.mode(), GateMode::Binary);
}

#[test]
fn loss_goes_down_on_the_copy_task() {
    for optimizer in [Optimizer::Adam, Optimizer::Sgd] {
        let (model, docs) = setup();
        let lr = if optimizer == Optimizer::Sgd { 0.3 } else { 1e-2 };
        let cfg = TrainConfig { optimizer, learning_rate: lr, ..short(80) };
        let out = train(model.clone(), GateSet::all_open(model.config().gate_layout()), &docs, &cfg).unwrap();
        let head: f64 = out.curve[..10].iter().map(|r| r.cross_entropy).sum();
        let tail: f64 = out.curve[70..].iter().map(|r| r.cross_entropy).sum();
        assert!(tail < head, "{optimizer:?}: {head} -> {tail}");
    }
}

#[test]
fn heavy_penalty_closes_every_gate() {
    let (model, docs) = setup();
    let cfg = TrainConfig { lambda: 50.0, ..short(150) };
    let out = prune(&model, &docs, &cfg, PruneStart::FineTune, &Sequential).unwrap();
    assert_eq!(out.gates.mode(), GateMode::InferredFixed);
    assert!(out.gates.values().iter().all(|&g| g == 0.0), "{:?}", out.gates.values());
    let (enc, dec) = out.gates.pruned_counts();
    assert_eq!(enc + dec, out.gates.layout().len());
}

#[test]
fn unpenalized_gates_stay_open() {
    let (model, docs) = setup();
    let out = prune(&model, &docs, &short(30), PruneStart::FineTune, &Sequential).unwrap();
    assert!(out.gates.values().iter().all(|&g| g > 0.0));
}

#[test]
fn fresh_pruning_ignores_the_given_parameters() {
    let (model, docs) = setup();
    let trained = train(model.clone(), GateSet::all_open(model.config().gate_layout()), &docs, &short(10)).unwrap().model;
    let cfg = short(3);
    let from_trained = prune(&trained, &docs, &cfg, PruneStart::Fresh, &Sequential).unwrap();
    let from_init = prune(&model, &docs, &cfg, PruneStart::Fresh, &Sequential).unwrap();
    assert_eq!(flat(&from_trained.model), flat(&from_init.model));
    let tuned = prune(&trained, &docs, &cfg, PruneStart::FineTune, &Sequential).unwrap();
    assert_ne!(flat(&tuned.model), flat(&from_init.model));
}

#[test]
fn sweep_reports_rows_in_lambda_order() {
    let (model, docs) = setup();
    let rows = lambda_sweep(&model, &docs, &docs[..4], &[0.0, 50.0], &short(150), PruneStart::FineTune, &Sequential).unwrap();
    assert_eq!(rows.iter().map(|r| r.lambda).collect::<Vec<_>>(), [0.0, 50.0]);
    assert_eq!(rows[0].pruned_encoder + rows[0].pruned_decoder, 0);
    assert_eq!(rows[1].pruned_encoder + rows[1].pruned_decoder, model.config().gate_layout().len());
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.metrics.token_accuracy)));
    assert!(lambda_sweep(&model, &docs, &docs, &[], &short(1), PruneStart::FineTune, &Sequential).is_err());
}

#[test]
fn empty_corpus_is_rejected() {
    let (model, _) = setup();
    assert!(train(model.clone(), GateSet::all_open(model.config().gate_layout()), &[], &short(1)).is_err());
}
