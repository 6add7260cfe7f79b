//! Command-line driver. Every subcommand writes plot-ready CSV/JSON; a JSON
//! `--config` file may supply any flag, with flags given on the command line
//! taking precedence.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use headlamp_core::corpus::{generate, CorpusSpec, TaggedDocument, Task};
use headlamp_core::evalstats::{mean_rouge, rouge, DEFAULT_ALPHA};
use headlamp_core::gating::{GateSet, HardConcreteParams, HeadAddress};
use headlamp_core::metrics::{compare_seeds, head_reports_with, HeadReport, CROSS_OFFSETS, ENCODER_OFFSETS};
use headlamp_core::model::{ActivationPlan, Model, ModelConfig, Vocab};
use headlamp_core::training::{prune, train_with, Optimizer, PruneStart, SweepRow, TrainConfig};
use headlamp_core::Rng;
use serde_json::{json, Value};

use crate::checkpoint::{self, Checkpoint, TrainSettings};
use crate::error::{Error, Result};
use crate::parallel::Pool;
use crate::{jsonl, reports, trace};

#[derive(Debug, Parser)]
#[command(name = "headlamp", version, about = "Attention-head analysis, pruning and sparse attention on a toy summarizer")]
pub struct Cli {
    /// JSON object whose keys are flag names of the chosen subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic tagged corpus as JSON lines.
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Train a summarizer and write a checkpoint plus loss curve.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Trace attention and report per-head metrics.
    #[command(args_override_self = true)]
    Analyze(AnalyzeArgs),
    /// Zero each gated head in turn and test the ROUGE-1 change.
    #[command(args_override_self = true)]
    Ablate(AblateArgs),
    /// Sweep the L0 penalty weight and report pruned heads.
    #[command(args_override_self = true)]
    Prune(PruneArgs),
    /// Score candidate summaries against references.
    #[command(args_override_self = true)]
    Rouge(RougeArgs),
    /// Compare per-head metric distributions of two checkpoints.
    #[command(args_override_self = true)]
    CompareSeeds(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Corpus spec JSON; omitted fields take defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long)]
    pub n_docs: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TaskArg {
    Copy,
    SelectEntities,
    LeadK,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Copy => Task::Copy,
            TaskArg::SelectEntities => Task::SelectEntities,
            TaskArg::LeadK => Task::LeadK,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PlanArg {
    Dense,
    SparseEnc,
    SparseTl,
    SparseCh,
    SparseAll,
}

impl From<PlanArg> for ActivationPlan {
    fn from(p: PlanArg) -> Self {
        match p {
            PlanArg::Dense => ActivationPlan::Dense,
            PlanArg::SparseEnc => ActivationPlan::SparseEnc,
            PlanArg::SparseTl => ActivationPlan::SparseTL,
            PlanArg::SparseCh => ActivationPlan::SparseCH,
            PlanArg::SparseAll => ActivationPlan::SparseAll,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 2)]
    pub enc_layers: usize,
    #[arg(long, default_value_t = 2)]
    pub dec_layers: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 8)]
    pub head_dim: usize,
    #[arg(long, default_value_t = 64)]
    pub ff_dim: usize,
    /// Vocabulary size including the three special symbols.
    #[arg(long, default_value_t = 100)]
    pub vocab_capacity: usize,
    /// Minimum corpus count for a token to enter the vocabulary.
    #[arg(long, default_value_t = 2)]
    pub min_count: usize,
    #[arg(long, default_value_t = 400)]
    pub max_src_len: usize,
    #[arg(long, default_value_t = 100)]
    pub max_tgt_len: usize,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.05)]
    pub gate_lr: f64,
    #[arg(long, default_value_t = 1.0)]
    pub grad_clip: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
}

impl OptimArgs {
    fn config(&self, lambda: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            lambda,
            learning_rate: self.lr,
            gate_learning_rate: Some(self.gate_lr),
            batch_size: self.batch_size,
            max_steps: self.steps,
            seed,
            grad_clip: self.grad_clip,
            optimizer: match self.optimizer {
                OptimizerArg::Sgd => Optimizer::Sgd,
                OptimizerArg::Adam => Optimizer::Adam,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = PlanArg::Dense)]
    pub plan: PlanArg,
    /// L0 penalty weight; above 0, Hard-Concrete gates are trained jointly from scratch.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Seeds parameter initialization, batch order and gate draws.
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Loss-curve CSV; defaults to the checkpoint path with `.loss.csv` appended.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct LoadArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Run under a different activation plan than the checkpoint's.
    #[arg(long, value_enum)]
    pub plan: Option<PlanArg>,
    /// Required for `--plan` to differ from the stored plan.
    #[arg(long)]
    pub override_plan: bool,
}

impl LoadArgs {
    fn load(&self) -> Result<Checkpoint> {
        checkpoint::load_with_plan(&self.ckpt, self.plan.map(Into::into), self.override_plan)
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Analyze a random sample of this many documents instead of all.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Seed for `--sample`.
    #[arg(long, requires = "sample")]
    pub sample_seed: Option<u64>,
}

impl SampleArgs {
    fn apply(&self, docs: Vec<TaggedDocument>) -> Result<Vec<TaggedDocument>> {
        let Some(n) = self.sample else { return Ok(docs) };
        let seed = self.sample_seed.ok_or_else(|| Error::Usage("--sample needs --sample-seed".into()))?;
        if n >= docs.len() {
            return Ok(docs);
        }
        let mut idx: Vec<usize> = (0..docs.len()).collect();
        Rng::new(seed).shuffle(&mut idx);
        let mut keep = idx[..n].to_vec();
        keep.sort_unstable();
        Ok(keep.into_iter().map(|i| docs[i].clone()).collect())
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub load: LoadArgs,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sample: SampleArgs,
    /// Encoder offsets counted by the relative-location metric.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = ENCODER_OFFSETS)]
    pub encoder_offsets: Vec<i64>,
    /// Cross-attention offsets counted by the relative-location metric.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = CROSS_OFFSETS)]
    pub cross_offsets: Vec<i64>,
    /// Skip writing per-head tensor files.
    #[arg(long)]
    pub no_trace: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub load: LoadArgs,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Heads as `region/Llayer/Hhead`, comma separated; default all gated heads.
    #[arg(long, value_delimiter = ',')]
    pub heads: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    pub load: LoadArgs,
    /// Training corpus for the gate fine-tuning.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Evaluation corpus; defaults to the training corpus.
    #[arg(long)]
    pub eval_corpus: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambda: Vec<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Re-initialize parameters instead of fine-tuning the checkpoint.
    #[arg(long)]
    pub fresh: bool,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct RougeArgs {
    /// One whitespace-tokenized summary per line.
    #[arg(long)]
    pub cand: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sample: SampleArgs,
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> u8 {
    let args: Vec<OsString> = args.into_iter().collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Splices flags from a `--config` JSON object in right after the
/// subcommand name, so explicit flags that follow override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => {
                let v = it.next().ok_or_else(|| Error::Usage("--config needs a file".into()))?;
                config = Some(PathBuf::from(v));
            }
            Some(s) if s.starts_with("--config=") => config = Some(PathBuf::from(&s["--config=".len()..])),
            _ => rest.push(a),
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let spec_err = |message: String| Error::Spec { path: path.clone(), message };
    let value: Value = serde_json::from_str(&text).map_err(|e| spec_err(e.to_string()))?;
    let Value::Object(map) = value else { return Err(spec_err("config must be a JSON object".into())) };
    let mut flags = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Bool(true) => flags.push(OsString::from(flag)),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(scalar)
                    .collect::<Option<_>>()
                    .ok_or_else(|| spec_err(format!("{key}: arrays may only hold scalars")))?;
                flags.push(OsString::from(format!("{flag}={}", parts.join(","))));
            }
            other => {
                let s = scalar(&other).ok_or_else(|| spec_err(format!("{key}: unsupported value")))?;
                flags.push(OsString::from(format!("{flag}={s}")));
            }
        }
    }
    let at = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 2);
    let at = at.ok_or_else(|| Error::Usage("--config given without a subcommand".into()))?;
    rest.splice(at..at, flags);
    Ok(rest)
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Ablate(a) => cmd_ablate(&a),
        Command::Prune(a) => cmd_prune(&a),
        Command::Rouge(a) => cmd_rouge(&a),
        Command::CompareSeeds(a) => cmd_compare(&a),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string(v).expect("summary serializes"));
}

fn read_corpus(path: &Path) -> Result<Vec<TaggedDocument>> {
    let docs = jsonl::read(path)?;
    if docs.is_empty() {
        return Err(Error::Usage(format!("{}: corpus is empty", path.display())));
    }
    Ok(docs)
}

/// Sorted tag vocabulary of a corpus.
pub fn corpus_tags(docs: &[TaggedDocument]) -> Vec<String> {
    docs.iter().flat_map(|d| d.pos.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect()
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<CorpusSpec>(&text).map_err(|e| Error::Spec { path: path.clone(), message: e.to_string() })?
        }
        None => CorpusSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(t) = a.task {
        spec.task = t.into();
    }
    if let Some(n) = a.n_docs {
        spec.n_docs = n;
    }
    let docs = generate(&spec)?;
    write_file(&a.out, jsonl::to_string(&docs))?;
    print_json(&json!({"v": 1, "docs": docs.len(), "out": a.out}));
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let docs = read_corpus(&a.corpus)?;
    let m = &a.model;
    let vocab = Vocab::build(&docs, m.vocab_capacity, m.min_count)?;
    let config = ModelConfig {
        enc_layers: m.enc_layers,
        dec_layers: m.dec_layers,
        heads_per_layer: m.heads,
        head_dim: m.head_dim,
        model_dim: m.heads * m.head_dim,
        ff_dim: m.ff_dim,
        vocab_size: vocab.len(),
        max_src_len: m.max_src_len,
        max_tgt_len: m.max_tgt_len,
        activation_plan: a.plan.into(),
        seed: a.seed,
    };
    let model = Model::new(config, vocab)?;
    let layout = model.config().gate_layout();
    let gates = if a.lambda > 0.0 {
        GateSet::hard_concrete(layout, HardConcreteParams::new(layout.len(), a.lambda)?)?
    } else {
        GateSet::all_open(layout)
    };
    let tc = a.optim.config(a.lambda, a.seed);
    let pool = Pool::from_env()?;
    let out = train_with(model, gates, &docs, &tc, &pool)?;
    let loss_path = a.loss_csv.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".loss.csv");
        PathBuf::from(p)
    });
    write_file(&loss_path, reports::loss_curve_csv(&out.curve))?;
    let ckpt = Checkpoint { model: out.model, gates: out.gates, train: Some(TrainSettings::from(&tc)) };
    write_file(&a.out, checkpoint::encode(&ckpt))?;
    let (pe, pd) = ckpt.gates.pruned_counts();
    print_json(&json!({
        "v": 1,
        "steps": out.curve.len(),
        "final": out.curve.last(),
        "pruned_encoder": pe,
        "pruned_decoder": pd,
        "checkpoint": a.out,
        "loss_csv": loss_path,
    }));
    Ok(())
}

fn analyze_docs(
    pool: &Pool,
    ckpt: &Checkpoint,
    docs: &[TaggedDocument],
    enc: &[i64],
    cross: &[i64],
) -> Result<(Vec<Vec<headlamp_core::model::AttentionRecord>>, Vec<HeadReport>)> {
    let traces = pool.trace_all(&ckpt.model, &ckpt.gates, docs)?;
    let reports = head_reports_with(&traces, docs, &corpus_tags(docs), enc, cross)?;
    Ok((traces, reports))
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let ckpt = a.load.load()?;
    let docs = a.sample.apply(read_corpus(&a.corpus)?)?;
    let pool = Pool::from_env()?;
    let (traces, reports) = analyze_docs(&pool, &ckpt, &docs, &a.encoder_offsets, &a.cross_offsets)?;
    write_file(&a.out.join("head_report.csv"), reports::head_reports_csv(&reports))?;
    write_file(&a.out.join("head_report.json"), reports::head_reports_json(&reports, docs.len()))?;
    let files = if a.no_trace { 0 } else { trace::write_trace(&a.out.join("trace"), &traces)?.entries.len() };
    print_json(&json!({"v": 1, "docs": docs.len(), "heads": reports.len(), "trace_files": files, "out": a.out}));
    Ok(())
}

fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let ckpt = a.load.load()?;
    let docs = read_corpus(&a.corpus)?;
    let heads: Vec<HeadAddress> = if a.heads.is_empty() {
        ckpt.gates.layout().addresses().collect()
    } else {
        a.heads
            .iter()
            .map(|h| reports::parse_head(h).ok_or_else(|| Error::Usage(format!("bad head {h:?}; expected region/L<layer>/H<head>"))))
            .collect::<Result<_>>()?
    };
    let pool = Pool::from_env()?;
    let results = pool.ablate_heads(&ckpt.model, &ckpt.gates, &docs, &heads, a.alpha)?;
    write_file(&a.out, reports::ablation_csv(&results))?;
    let significant = results.iter().filter(|r| r.significant).count();
    print_json(&json!({"v": 1, "test": "paired-t", "docs": docs.len(), "heads": results.len(), "significant": significant, "out": a.out}));
    Ok(())
}

fn cmd_prune(a: &PruneArgs) -> Result<()> {
    let base = a.load.load()?;
    let train_docs = read_corpus(&a.corpus)?;
    let eval_docs = match &a.eval_corpus {
        Some(p) => read_corpus(p)?,
        None => train_docs.clone(),
    };
    let start = if a.fresh { PruneStart::Fresh } else { PruneStart::FineTune };
    let pool = Pool::from_env()?;
    let mut rows = Vec::new();
    let mut retained = String::from(reports::RETAINED_HEADER);
    for &lambda in &a.lambda {
        let tc = a.optim.config(lambda, a.seed);
        let out = prune(&base.model, &train_docs, &tc, start, &pool)?;
        let (pruned_encoder, pruned_decoder) = out.gates.pruned_counts();
        let metrics = pool.evaluate(&out.model, &out.gates, &eval_docs)?;
        let ckpt = Checkpoint { model: out.model, gates: out.gates, train: Some(TrainSettings::from(&tc)) };
        let (_, heads) = analyze_docs(&pool, &ckpt, &eval_docs, &ENCODER_OFFSETS, &CROSS_OFFSETS)?;
        retained.push_str(&reports::retained_csv(lambda, &ckpt.gates, &heads));
        write_file(&a.out.join(format!("lambda_{lambda}.ckpt")), checkpoint::encode(&ckpt))?;
        rows.push(SweepRow { lambda, pruned_encoder, pruned_decoder, metrics, final_loss: out.curve.last().copied() });
    }
    write_file(&a.out.join("sweep.csv"), reports::sweep_csv(&rows))?;
    write_file(&a.out.join("retained.csv"), retained)?;
    let doc = json!({"v": 1, "base_plan": base.model.config().activation_plan, "rows": rows});
    write_file(&a.out.join("sweep.json"), serde_json::to_string_pretty(&doc).expect("sweep serializes"))?;
    print_json(
        &json!({"v": 1, "lambdas": a.lambda, "pruned": rows.iter().map(|r| (r.pruned_encoder, r.pruned_decoder)).collect::<Vec<_>>(), "out": a.out}),
    );
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(|l| l.split_whitespace().map(String::from).collect()).collect())
}

fn cmd_rouge(a: &RougeArgs) -> Result<()> {
    let cand = read_lines(&a.cand)?;
    let refs = read_lines(&a.reference)?;
    if cand.len() != refs.len() {
        return Err(Error::Usage(format!("{} candidate lines but {} reference lines", cand.len(), refs.len())));
    }
    let scores: Vec<_> = cand.iter().zip(&refs).map(|(c, r)| rouge(c, r)).collect();
    let mean = mean_rouge(&scores);
    let doc = json!({"v": 1, "pairs": scores.len(), "rouge1": mean.r1_f1, "rouge2": mean.r2_f1, "rougeL": mean.rl_f1});
    match &a.out {
        Some(p) => write_file(p, serde_json::to_string_pretty(&doc).expect("scores serialize")),
        None => {
            print_json(&doc);
            Ok(())
        }
    }
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let ca = checkpoint::load(&a.a)?;
    let cb = checkpoint::load(&a.b)?;
    if !ca.model.config().same_architecture(cb.model.config()) {
        return Err(Error::Usage("checkpoints have different architectures".into()));
    }
    let docs = a.sample.apply(read_corpus(&a.corpus)?)?;
    let pool = Pool::from_env()?;
    let (_, ra) = analyze_docs(&pool, &ca, &docs, &ENCODER_OFFSETS, &CROSS_OFFSETS)?;
    let (_, rb) = analyze_docs(&pool, &cb, &docs, &ENCODER_OFFSETS, &CROSS_OFFSETS)?;
    let profiles = compare_seeds(&ra, &rb)?;
    write_file(&a.out.join("profiles.csv"), reports::profiles_csv(&profiles))?;
    let doc = json!({"v": 1, "docs": docs.len(), "profiles": profiles});
    write_file(&a.out.join("profiles.json"), serde_json::to_string_pretty(&doc).expect("profiles serialize"))?;
    let max_gap = profiles.iter().flat_map(|p| p.differences.iter()).fold(0.0f64, |m, d| m.max(d.abs()));
    print_json(&json!({"v": 1, "docs": docs.len(), "max_abs_difference": max_gap, "out": a.out}));
    Ok(())
}
