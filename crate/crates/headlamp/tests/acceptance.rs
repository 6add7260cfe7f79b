//! End-to-end acceptance checks, one line per criterion.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use headlamp::checkpoint::{self, Checkpoint};
use headlamp::core::activations::{sparsemax, sparsemax_vjp};
use headlamp::core::corpus::{generate, CorpusSpec, TaggedDocument};
use headlamp::core::evalstats::{ablate_heads, evaluate, rouge_l, rouge_n};
use headlamp::core::gating::{GateSet, HardConcreteParams, HeadAddress, Region};
use headlamp::core::metrics::{confidence, ne_ratio, pos_kl, relative_location};
use headlamp::core::model::{copy_head, ActivationPlan, EncodedExample, Model, ModelConfig, Vocab};
use headlamp::core::training::{lambda_sweep, train, PruneStart, TrainConfig};
use headlamp::core::{Rng, Tensor};
use headlamp::parallel::Pool;
use headlamp::trace;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Sparsemax by enumerating every support set and keeping the one consistent
// with the KKT conditions.
fn enumerated_sparsemax(z: &[f64]) -> Vec<f64> {
    let k = z.len();
    for mask in 1u32..(1 << k) {
        let members: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let tau = (members.iter().map(|&i| z[i]).sum::<f64>() - 1.0) / members.len() as f64;
        let inside = members.iter().all(|&i| z[i] > tau);
        let outside = (0..k).filter(|i| mask & (1 << i) == 0).all(|i| z[i] <= tau);
        if inside && outside {
            return (0..k).map(|i| if mask & (1 << i) != 0 { z[i] - tau } else { 0.0 }).collect();
        }
    }
    unreachable!("some support satisfies the conditions")
}

fn sparsemax_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = Rng::new(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let dim = 2 + rng.below(7);
        let z: Vec<f64> = (0..dim).map(|_| 3.0 * rng.normal()).collect();
        let got = sparsemax(&z).map_err(|e| e.to_string())?;
        for (a, b) in got.values().iter().zip(enumerated_sparsemax(&z)) {
            worst = worst.max((a - b).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-8, || format!("max deviation {worst:e}"))?;
    ensure(secs < 10.0, || format!("took {secs:.2}s"))?;
    Ok(format!("1000 rows, max deviation {worst:.1e}, {secs:.3}s"))
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-300)
}

fn with_flat(model: &Model, flat: &[f64]) -> Model {
    let mut m = model.clone();
    let mut offset = 0;
    for t in m.params_mut().tensors_mut() {
        let n = t.len();
        t.data_mut().copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    }
    m
}

fn gradient_suite() -> Result<String, String> {
    let doc = generate(&CorpusSpec { n_docs: 1, src_len_min: 4, src_len_max: 4, oov_rate: 0.25, ..Default::default() }).unwrap().remove(0);
    let vocab = Vocab::build(std::slice::from_ref(&doc), 50, 1).unwrap();
    let mut report = Vec::new();
    for plan in [ActivationPlan::Dense, ActivationPlan::SparseEnc] {
        let cfg = ModelConfig {
            enc_layers: 1,
            dec_layers: 1,
            heads_per_layer: 2,
            head_dim: 3,
            model_dim: 6,
            ff_dim: 8,
            activation_plan: plan,
            ..Default::default()
        };
        let model = Model::new(cfg, vocab.clone()).unwrap();
        let gates = GateSet::all_open(model.config().gate_layout());
        let ex: EncodedExample = model.encode(&doc).unwrap();
        let analytic: Vec<f64> = model.gradients(&gates, &ex).unwrap().params.iter().flat_map(|t| t.data().to_vec()).collect();
        let x0: Vec<f64> = model.params().tensors().iter().flat_map(|t| t.data().to_vec()).collect();
        let numeric = central_difference(|x| with_flat(&model, x).teacher_forced(&gates, &ex, false).unwrap().loss, &x0, 1e-5);
        let err = relative_error(&analytic, &numeric);
        ensure(err <= 1e-4, || format!("{plan}: relative error {err:e}"))?;
        report.push(format!("{plan} {err:.1e}"));
    }

    let mut rng = Rng::new(3);
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 200 {
        let z: Vec<f64> = (0..2 + rng.below(6)).map(|_| rng.normal()).collect();
        let p = sparsemax(&z).unwrap();
        let tau = z[p.support()[0]] - p.values()[p.support()[0]];
        if z.iter().any(|v| (v - tau).abs() < 1e-3) {
            continue;
        }
        let g: Vec<f64> = z.iter().map(|_| rng.normal()).collect();
        let vjp = sparsemax_vjp(&p, &g).unwrap();
        let numeric = central_difference(|x| sparsemax(x).unwrap().values().iter().zip(&g).map(|(a, b)| a * b).sum(), &z, 1e-6);
        worst = worst.max(relative_error(&vjp, &numeric));
        checked += 1;
    }
    ensure(worst <= 1e-6, || format!("sparsemax vjp relative error {worst:e}"))?;
    report.push(format!("sparsemax vjp {worst:.1e} over {checked} rows"));
    Ok(report.join(", "))
}

fn hard_concrete_consistency() -> Result<String, String> {
    let mut worst = 0.0f64;
    let mut rng = Rng::new(21);
    for la in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let mut p = HardConcreteParams::new(1, 0.0).unwrap();
        p.log_alpha[0] = la;
        let n = 100_000;
        let open = (0..n).filter(|_| p.sample(&mut rng).values[0] > 0.0).count();
        let gap = (open as f64 / n as f64 - p.nonzero_probabilities()[0]).abs();
        worst = worst.max(gap);
    }
    ensure(worst <= 0.01, || format!("max gap {worst}"))?;
    let mut p = HardConcreteParams::new(2, 0.0).unwrap();
    p.log_alpha = vec![-10.0, 10.0];
    let inferred = p.infer();
    ensure(inferred == [0.0, 1.0], || format!("inferred {inferred:?}"))?;
    Ok(format!("max |MC - closed form| {worst:.4}; inferred gates reach exactly 0 and 1"))
}

fn redundancy_pruning() -> Result<String, String> {
    let lambdas = [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 3.0];
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        let spec = CorpusSpec { n_docs: 200, oov_rate: 0.1, seed: 10 + seed, ..Default::default() };
        let docs = generate(&spec).unwrap();
        let test = generate(&CorpusSpec { seed: 1000 + seed, n_docs: 60, ..spec }).unwrap();
        let vocab = Vocab::build(&docs, 100, 2).unwrap();
        let cfg = ModelConfig {
            enc_layers: 1,
            dec_layers: 1,
            heads_per_layer: 2,
            head_dim: 16,
            model_dim: 32,
            ff_dim: 64,
            max_tgt_len: 14,
            seed,
            ..Default::default()
        };
        let gates = GateSet::all_open(cfg.gate_layout());
        let model = Model::new(cfg, vocab).unwrap();
        let mut model = train(model, gates.clone(), &docs, &TrainConfig { seed, max_steps: 600, ..Default::default() }).unwrap().model;
        model.tie_heads(Region::EncoderSelf, 0, 0, 1).unwrap();
        model.tie_heads(Region::DecoderCross, 0, 0, 1).unwrap();
        let tune = TrainConfig { seed, max_steps: 200, ..Default::default() };
        let base = train(model, gates, &docs, &tune).unwrap().model;
        let rows = lambda_sweep(&base, &docs, &test, &lambdas, &tune, PruneStart::FineTune, &Pool::from_env().unwrap()).unwrap();

        let pruned: Vec<usize> = rows.iter().map(|r| r.pruned_encoder + r.pruned_decoder).collect();
        ensure(pruned.windows(2).all(|w| w[0] <= w[1]), || format!("seed {seed}: pruned counts {pruned:?} not monotone"))?;
        let reference = rows[0].metrics.rouge.r1_f1;
        let good = rows.iter().find(|r| r.pruned_encoder + r.pruned_decoder >= 1 && r.metrics.rouge.r1_f1 >= 0.98 * reference);
        let good = good.ok_or_else(|| format!("seed {seed}: no lambda prunes a head within 2% of ROUGE-1 {reference:.4}"))?;
        lines.push(format!(
            "seed {seed}: pruned {pruned:?}, lambda {} keeps ROUGE-1 {:.4} vs {reference:.4}",
            good.lambda, good.metrics.rouge.r1_f1
        ));
    }
    Ok(lines.join("; "))
}

fn oov_copy_corpus(seed: u64, len: (usize, usize), n: usize) -> Vec<TaggedDocument> {
    generate(&CorpusSpec { n_docs: n, oov_rate: 0.5, src_len_min: len.0, src_len_max: len.1, seed, ..Default::default() }).unwrap()
}

fn trained(docs: &[TaggedDocument], plan: ActivationPlan, seed: u64, steps: usize, max_tgt: usize) -> (Model, GateSet) {
    let vocab = Vocab::build(docs, 100, 2).unwrap();
    let cfg = ModelConfig { activation_plan: plan, max_tgt_len: max_tgt, seed, ..Default::default() };
    let gates = GateSet::all_open(cfg.gate_layout());
    let out = train(Model::new(cfg, vocab).unwrap(), gates, docs, &TrainConfig { seed, max_steps: steps, ..Default::default() }).unwrap();
    (out.model, out.gates)
}

fn ablation_correctness() -> Result<String, String> {
    let docs = oov_copy_corpus(0, (6, 10), 300);
    let test = oov_copy_corpus(99, (6, 10), 80);
    let (model, gates) = trained(&docs, ActivationPlan::Dense, 0, 400, 14);
    let pool = Pool::from_env().unwrap();
    let heads: Vec<HeadAddress> = gates.layout().addresses().collect();
    let results = pool.ablate_heads(&model, &gates, &test, &heads, 0.05).unwrap();
    ensure(results.iter().all(|r| (0.0..=1.0).contains(&r.p)), || "p-value outside [0, 1]".into())?;
    let ch = copy_head(model.config().dec_layers);
    let copy = results.iter().find(|r| r.head == ch).unwrap();
    ensure(copy.significant && copy.mean_delta < 0.0, || format!("copy head: mean delta {:.4}, p {:.3e}", copy.mean_delta, copy.p))?;

    let closed = HeadAddress::new(Region::EncoderSelf, 0, 2);
    let with_closed = gates.set_binary_gate(closed, false).unwrap();
    let again = ablate_heads(&model, &with_closed, &test, &[closed], 0.05).unwrap().remove(0);
    ensure(again.deltas.iter().all(|&d| d == 0.0) && again.mean_delta == 0.0, || "closed head changed ROUGE".into())?;
    ensure((0.0..=1.0).contains(&again.p), || format!("p {}", again.p))?;
    Ok(format!(
        "copy head mean delta {:.4} (p {:.2e}); already-closed head delta exactly 0; {} p-values in [0, 1]",
        copy.mean_delta,
        copy.p,
        results.len()
    ))
}

fn one_hot_rows(n: usize, col: impl Fn(usize) -> usize, width: usize) -> Tensor {
    let rows: Vec<Vec<f64>> = (0..n).map(|r| (0..width).map(|c| if c == col(r) { 1.0 } else { 0.0 }).collect()).collect();
    Tensor::from_rows(&rows).unwrap()
}

fn tagged(tags: &[&str], ne: &[bool]) -> TaggedDocument {
    TaggedDocument {
        tokens: (0..tags.len()).map(|i| format!("t{i}")).collect(),
        pos: tags.iter().map(|s| s.to_string()).collect(),
        is_ne: ne.to_vec(),
        summary: vec![],
    }
}

fn metric_fixtures() -> Result<String, String> {
    let superdiagonal = one_hot_rows(5, |r| r + 1, 6);
    let rel = relative_location(&[&superdiagonal], &[-1, 1]).unwrap();
    ensure((rel.headline - 1.0).abs() <= 1e-9, || format!("rel_location {}", rel.headline))?;

    let k = 7;
    let uniform = Tensor::full(&[4, k], 1.0 / k as f64);
    let conf = confidence(&[&uniform]).unwrap();
    ensure((conf - 1.0 / k as f64).abs() <= 1e-9, || format!("confidence {conf}"))?;

    let tags: Vec<String> = ["DET", "NOUN", "PUNCT", "VERB"].iter().map(|s| s.to_string()).collect();
    let doc = tagged(&["DET", "NOUN", "PUNCT", "VERB", "DET", "NOUN", "PUNCT", "VERB"], &[false; 8]);
    let on_nouns = one_hot_rows(3, |r| if r % 2 == 0 { 1 } else { 5 }, 8);
    let kl = pos_kl(&[&on_nouns], &[&doc], &tags).unwrap();
    ensure((kl - 4f64.ln()).abs() <= 1e-9, || format!("pos_kl {kl}"))?;

    let flags: Vec<bool> = (0..10).map(|i| i == 3).collect();
    let ne_doc = tagged(&["NOUN"; 10], &flags);
    let flat = Tensor::full(&[6, 10], 0.1);
    let ratio = ne_ratio(&[&flat], &[&ne_doc]).unwrap();
    ensure((ratio - 0.1).abs() <= 1e-9, || format!("ne_ratio {ratio}"))?;
    Ok(format!("rel_location {:.3}, confidence {conf:.6}, pos_kl {kl:.6}, ne_ratio {ratio:.6}", rel.headline))
}

fn counted_overlap(cand: &[String], refs: &[String], n: usize) -> f64 {
    let grams = |s: &[String]| -> Vec<Vec<String>> {
        if s.len() < n {
            vec![]
        } else {
            s.windows(n).map(|w| w.to_vec()).collect()
        }
    };
    let (c, r) = (grams(cand), grams(refs));
    let mut pool = r.clone();
    let mut overlap = 0usize;
    for g in &c {
        if let Some(at) = pool.iter().position(|x| x == g) {
            pool.swap_remove(at);
            overlap += 1;
        }
    }
    f1(overlap, c.len(), r.len())
}

fn f1(overlap: usize, cand: usize, refs: usize) -> f64 {
    if overlap == 0 || cand == 0 || refs == 0 {
        return 0.0;
    }
    2.0 * overlap as f64 / (cand + refs) as f64
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == *n))
}

fn subsequence_lcs(a: &[String], b: &[String]) -> usize {
    (0u32..(1 << a.len()))
        .filter_map(|mask| {
            let pick: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
            is_subsequence(&pick, b).then_some(pick.len())
        })
        .max()
        .unwrap_or(0)
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn rouge_oracle() -> Result<String, String> {
    let mut rng = Rng::new(8);
    let alphabet = ["a", "b", "c", "d", "e"];
    for case in 0..100 {
        let mut draw = || -> Vec<String> { (0..rng.below(11)).map(|_| alphabet[rng.below(3 + case % 3)].to_string()).collect() };
        let (cand, refs) = (draw(), draw());
        for n in [1, 2] {
            let (got, want) = (rouge_n(&cand, &refs, n), counted_overlap(&cand, &refs, n));
            ensure(got == want, || format!("rouge-{n} {cand:?} / {refs:?}: {got} vs {want}"))?;
        }
        let want = f1(subsequence_lcs(&cand, &refs), cand.len(), refs.len());
        let got = rouge_l(&cand, &refs);
        ensure(got == want, || format!("rouge-l {cand:?} / {refs:?}: {got} vs {want}"))?;
    }
    let examples = [
        (rouge_n(&words("the cat sat on mat"), &words("the cat"), 1), 4.0 / 7.0),
        (rouge_n(&words("a b c d"), &words("b c"), 2), 0.5),
        (rouge_l(&words("a b c d"), &words("a c b d")), 0.75),
    ];
    for (got, want) in examples {
        ensure(got == want, || format!("worked example {got} vs {want}"))?;
    }
    Ok("100 random pairs exact for ROUGE-1, ROUGE-2, ROUGE-L; worked examples 4/7, 0.5, 0.75 exact".into())
}

fn encoder_zeros(model: &Model, gates: &GateSet, docs: &[TaggedDocument]) -> (usize, usize) {
    let traces = Pool::from_env().unwrap().trace_all(model, gates, docs).unwrap();
    traces
        .iter()
        .flatten()
        .filter(|r| r.address.region == Region::EncoderSelf)
        .fold((0, 0), |(z, n), r| (z + r.exact_zeros(), n + r.rows.len()))
}

fn sparsity_analogue() -> Result<String, String> {
    let docs = generate(&CorpusSpec { n_docs: 300, oov_rate: 0.2, ..Default::default() }).unwrap();
    let test = generate(&CorpusSpec { n_docs: 60, oov_rate: 0.2, seed: 77, ..Default::default() }).unwrap();
    let (dense, dg) = trained(&docs, ActivationPlan::Dense, 0, 300, 14);
    let (sparse, sg) = trained(&docs, ActivationPlan::SparseEnc, 0, 300, 14);
    let (dz, dn) = encoder_zeros(&dense, &dg, &test);
    let (sz, sn) = encoder_zeros(&sparse, &sg, &test);
    ensure(sz > dz, || format!("sparse-enc zeros {sz} vs dense {dz}"))?;
    Ok(format!("exact zeros in encoder attention: sparse-enc {sz}/{sn} ({:.1}%), dense {dz}/{dn}", 100.0 * sz as f64 / sn as f64))
}

fn collapse_analogue() -> Result<String, String> {
    let mut gaps = Vec::new();
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        let docs = oov_copy_corpus(seed, (32, 40), 300);
        let test = oov_copy_corpus(99, (32, 40), 100);
        let mut acc = Vec::new();
        for plan in [ActivationPlan::SparseAll, ActivationPlan::SparseCH] {
            let (model, gates) = trained(&docs, plan, seed, 300, 44);
            acc.push(evaluate(&model, &gates, &test).unwrap().token_accuracy);
        }
        let gap = 100.0 * (acc[1] - acc[0]);
        lines.push(format!("seed {seed}: sparse-all {:.1}% vs sparse-ch {:.1}% ({gap:+.1} pp)", 100.0 * acc[0], 100.0 * acc[1]));
        gaps.push(gap);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let summary = format!("{}; mean gap {mean:.1} pp", lines.join("; "));
    ensure(mean >= 20.0, || summary.clone())?;
    Ok(summary)
}

fn determinism_and_round_trips() -> Result<String, String> {
    let docs = generate(&CorpusSpec { n_docs: 40, oov_rate: 0.3, ..Default::default() }).unwrap();
    let vocab = Vocab::build(&docs, 100, 2).unwrap();
    let cfg = ModelConfig { activation_plan: ActivationPlan::SparseEnc, max_tgt_len: 14, seed: 4, ..Default::default() };
    let layout = cfg.gate_layout();
    let model = Model::new(cfg, vocab).unwrap();
    let gates = GateSet::hard_concrete(layout, HardConcreteParams::new(layout.len(), 0.05).unwrap()).unwrap();
    let tc = TrainConfig { lambda: 0.05, seed: 4, max_steps: 40, ..Default::default() };
    let runs: Vec<_> = (0..2).map(|_| train(model.clone(), gates.clone(), &docs, &tc).unwrap()).collect();
    let bits =
        |m: &Model| m.params().tensors().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect::<Vec<_>>();
    ensure(runs[0].curve == runs[1].curve && bits(&runs[0].model) == bits(&runs[1].model) && runs[0].gates == runs[1].gates, || {
        "repeat run differs".into()
    })?;

    let dir = std::env::temp_dir().join(format!("headlamp-acceptance-{}", std::process::id()));
    let ckpt_path = dir.join("m.ckpt");
    std::fs::create_dir_all(&dir).unwrap();
    let ckpt = Checkpoint { model: runs[0].model.clone(), gates: runs[0].gates.clone(), train: Some((&tc).into()) };
    checkpoint::save(&ckpt_path, &ckpt).unwrap();
    let back = checkpoint::load(&ckpt_path).unwrap();
    ensure(bits(&back.model) == bits(&ckpt.model) && back.gates == ckpt.gates, || "checkpoint parameters differ".into())?;
    for doc in &docs[..10] {
        let a = ckpt.model.decode(&ckpt.gates, doc, true).unwrap();
        let b = back.model.decode(&back.gates, doc, true).unwrap();
        ensure(a.tokens == b.tokens && a.records == b.records, || "reloaded model decodes differently".into())?;
    }

    let traces = Pool::from_env().unwrap().trace_all(&back.model, &back.gates, &docs[..10]).unwrap();
    trace::write_trace(&dir.join("trace"), &traces).unwrap();
    let reread = trace::read_trace(&dir.join("trace")).unwrap();
    let same = traces.iter().flatten().zip(reread.iter().flatten()).all(|(a, b)| {
        a.address == b.address
            && a.rows.shape() == b.rows.shape()
            && a.rows.data().iter().zip(b.rows.data()).all(|(x, y)| x.to_bits() == y.to_bits())
    });
    let count = traces.iter().map(Vec::len).sum::<usize>();
    std::fs::remove_dir_all(&dir).ok();
    ensure(same && count == reread.iter().map(Vec::len).sum::<usize>(), || "trace round trip differs".into())?;
    Ok(format!("repeat training bit-identical; checkpoint and {count} trace tensors round-trip bit-identically"))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 10] = [
        ("sparsemax matches support enumeration", sparsemax_oracle),
        ("gradients match central differences", gradient_suite),
        ("hard-concrete sampling matches closed form", hard_concrete_consistency),
        ("redundant heads are pruned", redundancy_pruning),
        ("ablation correctness", ablation_correctness),
        ("metric fixtures", metric_fixtures),
        ("rouge matches brute force", rouge_oracle),
        ("sparse encoder attention has more exact zeros", sparsity_analogue),
        ("sparsemax on the copy head hurts copying", collapse_analogue),
        ("determinism and round trips", determinism_and_round_trips),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let label = format!("criterion {:>2}: {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {label} [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label} [{secs:.1}s] {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
