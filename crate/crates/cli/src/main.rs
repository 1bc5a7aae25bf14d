use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ompadvisor::augment::{augment_corpus, AugMode};
use ompadvisor::corpus::{
    build_corpus, read_samples, write_corpus, write_json, write_jsonl, BuildOptions, CorpusStats,
    Sample, Split,
};
use ompadvisor::encode::{encode_all, EncodeOptions, Vocabulary, DEFAULT_MIN_FREQ};
use ompadvisor::metrics::{evaluate, write_evaluation, LABEL_NAMES};
use ompadvisor::model::{
    check_gradients, predict_source, probe_input, train, AttentionScale, EncodeMeta, ModelBundle, ModelConfig,
    ModelParams, TrainOptions,
};
use ompadvisor::synth::{synth_corpus, SynthOptions};

const THREADS_ENV: &str = "OMPADVISOR_THREADS";

/// Predicts OpenMP `parallel for` pragmas and their private/reduction
/// clauses for C loops.
#[derive(Debug, Parser)]
#[command(name = "ompadvisor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract labeled loops from a tree of C files.
    BuildCorpus(BuildCorpusArgs),
    /// Rename variables in a corpus for one epoch of a schedule.
    Augment(AugmentArgs),
    /// Train a model on a corpus directory.
    Train(TrainArgs),
    /// Predict labels for every loop in a C file.
    Predict(PredictArgs),
    /// Evaluate a model on a corpus split or a benchmark set.
    Evaluate(EvaluateArgs),
    /// Print corpus statistics tables.
    Stats(StatsArgs),
    /// Compare analytic and finite-difference gradients.
    CheckGradients(CheckGradientsArgs),
    /// Generate a synthetic corpus with known labeling rules.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
struct BuildCorpusArgs {
    src_dir: PathBuf,
    /// Include declarations and prior assignments of loop variables.
    #[arg(long)]
    with_scope: bool,
    /// Directory of benchmark sources held out as a test-only set.
    #[arg(long)]
    benchmarks: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    None,
    Curriculum,
    Replaced,
}

impl From<Mode> for AugMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::None => AugMode::None,
            Mode::Curriculum => AugMode::Curriculum,
            Mode::Replaced => AugMode::Replaced,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct AugmentArgs {
    corpus: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    epoch: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    corpus_dir: PathBuf,
    #[arg(long, value_enum, default_value = "curriculum")]
    aug: Mode,
    #[arg(long, default_value_t = 10)]
    epochs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Divide attention scores by d_head.
    #[arg(long, conflicts_with = "scale_sqrt_d")]
    scale_d: bool,
    /// Divide attention scores by sqrt(d_head) (default).
    #[arg(long)]
    scale_sqrt_d: bool,
    #[arg(long, default_value_t = 64)]
    d_model: usize,
    #[arg(long, default_value_t = 4)]
    n_heads: usize,
    #[arg(long, default_value_t = 2)]
    n_layers: usize,
    #[arg(long, default_value_t = 256)]
    d_ff: usize,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 256)]
    max_code: usize,
    #[arg(long, default_value_t = 32)]
    max_dfg: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_FREQ)]
    min_freq: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct PredictArgs {
    model_dir: PathBuf,
    file: PathBuf,
    /// Zero the clause labels of loops predicted not to need a pragma.
    #[arg(long)]
    gate: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SplitArg {
    Train,
    Valid,
    Test,
    All,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    model_dir: PathBuf,
    /// Corpus directory, corpus JSONL file, or `benchmarks.jsonl`.
    data: PathBuf,
    #[arg(long)]
    gate: bool,
    /// Split to evaluate on a corpus; benchmark sets always use every sample.
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Report per-benchmark tables (implied for files named benchmarks.jsonl).
    #[arg(long)]
    by_benchmark: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct StatsArgs {
    corpus: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GradConfig {
    Small,
    Default,
}

#[derive(Debug, Args, Serialize)]
struct CheckGradientsArgs {
    #[arg(long, value_enum, default_value = "small")]
    config: GradConfig,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use a random symmetric attention mask instead of an open one.
    #[arg(long)]
    random_mask: bool,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Serialize)]
struct RunConfig<'a, A: Serialize> {
    subcommand: &'a str,
    threads: usize,
    #[serde(flatten)]
    args: &'a A,
    #[serde(skip_serializing_if = "Option::is_none")]
    effective: Option<serde_json::Value>,
}

fn write_run_config<A: Serialize>(
    dir: &Path,
    subcommand: &str,
    threads: usize,
    args: &A,
    effective: Option<serde_json::Value>,
) -> Result<()> {
    let rc = RunConfig {
        subcommand,
        threads,
        args,
        effective,
    };
    write_json(&dir.join("run_config.json"), &rc)?;
    Ok(())
}

fn threads_from_env() -> std::result::Result<usize, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        },
    }
}

fn split_of(samples: Vec<Sample>, split: Split) -> Vec<Sample> {
    samples.into_iter().filter(|s| s.split == split).collect()
}

fn cmd_build_corpus(a: &BuildCorpusArgs, threads: usize) -> Result<()> {
    let opts = BuildOptions {
        with_scope: a.with_scope,
        seed: a.seed,
        benchmarks: a.benchmarks.clone(),
        threads,
    };
    let build = build_corpus(&a.src_dir, &opts)?;
    write_corpus(&build, &a.output)?;
    write_run_config(&a.output, "build-corpus", threads, a, None)?;
    eprintln!(
        "{} samples, {} rejects, {} benchmark samples -> {}",
        build.samples.len(),
        build.rejects.len(),
        build.benchmark_samples.len(),
        a.output.display()
    );
    Ok(())
}

fn cmd_augment(a: &AugmentArgs, threads: usize) -> Result<()> {
    let samples = read_samples(&a.corpus)?;
    let out = augment_corpus(&samples, a.mode.into(), a.epoch, a.seed)?;
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_jsonl(&a.output, &out)?;
    let fraction = AugMode::from(a.mode).fraction(a.epoch)?;
    let rc = RunConfig {
        subcommand: "augment",
        threads,
        args: a,
        effective: Some(serde_json::json!({ "rename_fraction": fraction })),
    };
    let mut rc_path = a.output.clone().into_os_string();
    rc_path.push(".run_config.json");
    write_json(Path::new(&rc_path), &rc)?;
    Ok(())
}

fn cmd_train(a: &TrainArgs, threads: usize) -> Result<()> {
    let samples = read_samples(&a.corpus_dir)?;
    let with_scope = samples.iter().any(|s| !s.context_code.is_empty());
    let train_set = split_of(samples.clone(), Split::Train);
    let valid_set = split_of(samples, Split::Valid);
    if train_set.is_empty() || valid_set.is_empty() {
        bail!(
            "{}: train and valid splits must be non-empty ({} train, {} valid)",
            a.corpus_dir.display(),
            train_set.len(),
            valid_set.len()
        );
    }
    let vocab = Vocabulary::build(&train_set, a.min_freq)?;
    let encode = EncodeOptions {
        max_code: a.max_code,
        max_dfg: a.max_dfg,
    };
    let cfg = ModelConfig {
        d_model: a.d_model,
        n_heads: a.n_heads,
        n_layers: a.n_layers,
        d_ff: a.d_ff,
        max_len: encode.max_len(),
        dropout_rate: a.dropout,
        vocab_size: vocab.len(),
        seed: a.seed,
        scale: if a.scale_d {
            AttentionScale::DHead
        } else {
            AttentionScale::SqrtDHead
        },
    };
    let opts = TrainOptions {
        epochs: a.epochs,
        aug: a.aug.into(),
        lr: a.lr,
        batch_size: a.batch_size,
        threads,
        encode,
        ..TrainOptions::default()
    };
    let (_, encode_stats) = encode_all(&train_set, &vocab, &encode)?;
    let (params, history) = train::<f32>(&train_set, &valid_set, &vocab, &cfg, &opts, |r| {
        eprintln!(
            "epoch {:>2}  rename {:.1}  train_loss {:.4}  valid_loss {:.4}  valid_acc {:.3} ({:.3} {:.3} {:.3})",
            r.epoch,
            r.rename_fraction,
            r.train_loss,
            r.valid_loss,
            r.valid_accuracy,
            r.valid_label_accuracy[0],
            r.valid_label_accuracy[1],
            r.valid_label_accuracy[2]
        )
    })?;
    let bundle = ModelBundle {
        config: cfg.clone(),
        params,
        vocab,
        encode: EncodeMeta {
            max_code: encode.max_code,
            max_dfg: encode.max_dfg,
            with_scope,
        },
    };
    bundle.save(&a.output)?;
    write_json(&a.output.join("history.json"), &history)?;
    write_json(&a.output.join("encode_stats.json"), &encode_stats)?;
    write_run_config(
        &a.output,
        "train",
        threads,
        a,
        Some(serde_json::json!({ "model": cfg, "train": opts, "with_scope": with_scope })),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct LabelTriple<T> {
    pragma: T,
    private: T,
    reduction: T,
}

impl<T: Copy> LabelTriple<T> {
    fn new(v: [T; 3]) -> Self {
        LabelTriple {
            pragma: v[0],
            private: v[1],
            reduction: v[2],
        }
    }
}

#[derive(Serialize)]
struct PredictRecord {
    line: u32,
    code: String,
    probs: LabelTriple<f64>,
    labels: LabelTriple<u8>,
    gated: bool,
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.model_dir)?;
    let source = fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let preds = predict_source(
        &bundle.params,
        &bundle.config,
        &bundle.vocab,
        &bundle.encode.options(),
        bundle.encode.with_scope,
        &source,
        a.gate,
    )
    .with_context(|| format!("{}", a.file.display()))?;
    if a.json {
        let records: Vec<PredictRecord> = preds
            .iter()
            .map(|p| PredictRecord {
                line: p.line,
                code: p.loop_code.clone(),
                probs: LabelTriple::new(p.prediction.probs),
                labels: LabelTriple::new(p.prediction.labels.map(u8::from)),
                gated: p.prediction.gated,
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&records)?);
    } else {
        for p in &preds {
            let parts: Vec<String> = LABEL_NAMES
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    format!(
                        "{name}={} ({:.3})",
                        u8::from(p.prediction.labels[k]),
                        p.prediction.probs[k]
                    )
                })
                .collect();
            println!("line {}: {}", p.line, parts.join(" "));
        }
    }
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs, threads: usize) -> Result<()> {
    let bundle = ModelBundle::load(&a.model_dir)?;
    let is_bench = a.by_benchmark
        || a.data.file_stem().is_some_and(|s| s == "benchmarks");
    let samples = read_samples(&a.data)?;
    let samples = match (is_bench, a.split) {
        (true, _) | (_, SplitArg::All) => samples,
        (false, SplitArg::Train) => split_of(samples, Split::Train),
        (false, SplitArg::Valid) => split_of(samples, Split::Valid),
        (false, SplitArg::Test) => split_of(samples, Split::Test),
    };
    if samples.is_empty() {
        bail!("{}: no samples to evaluate", a.data.display());
    }
    let eval = evaluate(
        &bundle.params,
        &bundle.config,
        &bundle.vocab,
        &bundle.encode.options(),
        &samples,
        a.gate,
        is_bench,
        threads,
    )?;
    write_evaluation(&a.output, &eval)?;
    write_run_config(
        &a.output,
        "evaluate",
        threads,
        a,
        Some(serde_json::json!({ "benchmark_mode": is_bench, "samples": samples.len() })),
    )?;
    print!("{}", eval.report.render());
    Ok(())
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let samples = read_samples(&a.corpus)?;
    let stats = CorpusStats::from_samples(&samples);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&stats)?);
    } else {
        print!("{}", stats.render_tables());
    }
    Ok(())
}

/// Returns whether the check passed.
fn cmd_check_gradients(a: &CheckGradientsArgs) -> Result<bool> {
    let (vocab, len) = (12, 10);
    let cfg = match a.config {
        GradConfig::Small => ModelConfig::small(vocab, len, a.seed),
        GradConfig::Default => ModelConfig {
            dropout_rate: 0.0,
            ..ModelConfig::new(vocab, len, a.seed)
        },
    };
    let mut params = ModelParams::<f64>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    params.randomize(0.5, &mut ChaCha8Rng::seed_from_u64(a.seed ^ 1));
    let input = probe_input(vocab, len, a.seed, a.random_mask);
    let labels = input.labels;
    let report = check_gradients(&params, &cfg, &input, &labels, 20, a.seed)?;
    for g in &report.groups {
        println!("{:<16}{:>6}  {:.3e}", g.name, g.checked, g.max_relative_error);
    }
    let ok = report.max_relative_error < 1e-3;
    println!(
        "max relative error {:.3e} ({})",
        report.max_relative_error,
        if ok { "ok" } else { "FAILED" }
    );
    Ok(ok)
}

fn cmd_synth(a: &SynthArgs, threads: usize) -> Result<()> {
    let samples = synth_corpus(&SynthOptions {
        n: a.n,
        seed: a.seed,
        ..SynthOptions::default()
    });
    fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    write_jsonl(&a.output.join("corpus.jsonl"), &samples)?;
    write_json(&a.output.join("stats.json"), &CorpusStats::from_samples(&samples))?;
    write_run_config(&a.output, "synth", threads, a, None)?;
    Ok(())
}

fn run(cli: Cli, threads: usize) -> Result<bool> {
    match &cli.command {
        Command::BuildCorpus(a) => cmd_build_corpus(a, threads)?,
        Command::Augment(a) => cmd_augment(a, threads)?,
        Command::Train(a) => cmd_train(a, threads)?,
        Command::Predict(a) => cmd_predict(a)?,
        Command::Evaluate(a) => cmd_evaluate(a, threads)?,
        Command::Stats(a) => cmd_stats(a)?,
        Command::CheckGradients(a) => return cmd_check_gradients(a),
        Command::Synth(a) => cmd_synth(a, threads)?,
    }
    Ok(true)
}

/// The error chain joined with `: `, skipping causes whose text the
/// previous message already includes.
fn error_message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        last = msg;
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    match run(cli, threads) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", error_message(&e));
            ExitCode::from(2)
        }
    }
}
