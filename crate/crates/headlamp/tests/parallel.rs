use headlamp::core::corpus::{generate, CorpusSpec, TaggedDocument};
use headlamp::core::evalstats::{ablate_heads, decode_all, evaluate};
use headlamp::core::gating::{GateSet, HardConcreteParams};
use headlamp::core::model::{Model, ModelConfig, Vocab};
use headlamp::core::training::{train_with, Sequential, TrainConfig};
use headlamp::parallel::Pool;

fn setup() -> (Model, Vec<TaggedDocument>) {
    let docs = generate(&CorpusSpec { n_docs: 12, oov_rate: 0.3, ..Default::default() }).unwrap();
    let vocab = Vocab::build(&docs, 60, 2).unwrap();
    let cfg = ModelConfig {
        enc_layers: 1,
        dec_layers: 1,
        heads_per_layer: 2,
        head_dim: 4,
        model_dim: 8,
        ff_dim: 12,
        max_tgt_len: 12,
        ..Default::default()
    };
    (Model::new(cfg, vocab).unwrap(), docs)
}

fn bits(model: &Model) -> Vec<u64> {
    model.params().tensors().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect()
}

#[test]
fn pooled_training_matches_sequential_for_any_thread_count() {
    let (model, docs) = setup();
    let layout = model.config().gate_layout();
    let gates = GateSet::hard_concrete(layout, HardConcreteParams::new(layout.len(), 0.2).unwrap()).unwrap();
    let cfg = TrainConfig { lambda: 0.2, max_steps: 6, batch_size: 5, ..Default::default() };
    let reference = train_with(model.clone(), gates.clone(), &docs, &cfg, &Sequential).unwrap();
    for threads in [1, 2, 3] {
        let pool = Pool::new(threads).unwrap();
        let out = train_with(model.clone(), gates.clone(), &docs, &cfg, &pool).unwrap();
        assert_eq!(out.curve, reference.curve, "{threads} threads");
        assert_eq!(bits(&out.model), bits(&reference.model));
        assert_eq!(out.gates, reference.gates);
    }
}

#[test]
fn pooled_decoding_and_ablation_match_sequential() {
    let (model, docs) = setup();
    let gates = GateSet::all_open(model.config().gate_layout());
    let heads: Vec<_> = gates.layout().addresses().collect();
    let summaries = decode_all(&model, &gates, &docs).unwrap();
    let metrics = evaluate(&model, &gates, &docs).unwrap();
    let ablation = ablate_heads(&model, &gates, &docs, &heads, 0.05).unwrap();
    for threads in [1, 4] {
        let pool = Pool::new(threads).unwrap();
        assert_eq!(pool.decode_all(&model, &gates, &docs).unwrap(), summaries);
        assert_eq!(pool.evaluate(&model, &gates, &docs).unwrap(), metrics);
        assert_eq!(pool.ablate_heads(&model, &gates, &docs, &heads, 0.05).unwrap(), ablation);
        let traces = pool.trace_all(&model, &gates, &docs).unwrap();
        for (t, d) in traces.iter().zip(&docs) {
            let seq = model.decode(&gates, d, true).unwrap().records;
            assert_eq!(t.len(), seq.len());
            assert!(t.iter().zip(&seq).all(|(a, b)| a.address == b.address && a.rows == b.rows));
        }
    }
}
