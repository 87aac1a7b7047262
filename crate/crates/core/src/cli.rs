//! Command-line front end.
//!
//! Every command writes `manifest.json` into its output directory with the
//! resolved flags, the seed, a fingerprint of the input corpus and start and
//! end times. Exit codes: 0 success, 1 usage error, 2 data error (missing or
//! malformed input), 3 runtime error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cdf::run_cdf_lda;
use crate::checkpoint;
use crate::corpus::{batches, load_uci, minibatch_stream, shuffle_documents, split_train_test, write_uci, Corpus};
use crate::dsgs::{self, wait_for_model, worker_run, ParameterClient, ServerOptions};
use crate::eval::{corpus_perplexity, write_eval_csv, EvalConfig};
use crate::metrics::{MetricsRecord, MetricsWriter};
use crate::sampler::{rng_from_seed, run_cgs};
use crate::stats::{GlobalStats, Hyper};
use crate::streaming::{run_sgs, train_perplexity, BatchReport, StreamConfig};
use crate::synth::{generate, DocLength, Drift, GenSpec};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "streamlda", version, about = "Streaming LDA: batch, streaming, CDF and distributed Gibbs samplers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Batch collapsed Gibbs sampling over the whole training set.
    TrainCgs(TrainCgsArgs),
    /// Streaming Gibbs sampling over mini-batches, with optional decay.
    TrainSgs(TrainSgsArgs),
    /// Conditional density filtering baseline.
    TrainCdf(TrainCdfArgs),
    /// Held-out perplexity of a checkpoint on a test corpus.
    Eval(EvalArgs),
    /// Run a parameter server.
    Serve(ServeArgs),
    /// Run a worker against a parameter server.
    Worker(WorkerArgs),
    /// Measure in-process distributed throughput for several worker counts.
    Bench(BenchArgs),
    /// Generate a synthetic corpus in UCI format.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    /// UCI docword file.
    #[arg(long)]
    pub docword: PathBuf,
    /// UCI vocabulary file, one word per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = Hyper::DEFAULT_TOPICS)]
    pub topics: usize,
    #[arg(long, default_value_t = Hyper::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = Hyper::DEFAULT_BETA)]
    pub beta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Fraction of documents held out for evaluation; 0 trains on everything.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainCgsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Gibbs iterations, the initialization pass included.
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainSgsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    /// Decay of the global counts after each batch, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub decay: f64,
    /// Non-improving iterations tolerated per batch; 0 disables early stopping.
    #[arg(long, default_value_t = StreamConfig::DEFAULT_PATIENCE)]
    pub patience: usize,
    #[arg(long, default_value_t = StreamConfig::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Shuffle training documents with the seed before streaming.
    #[arg(long)]
    pub shuffle: bool,
    /// Score the held-out set after every batch.
    #[arg(long)]
    pub batch_eval: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainCdfArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long)]
    pub shuffle: bool,
    #[arg(long)]
    pub batch_eval: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Checkpoint written by a training command.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub bind: String,
    #[arg(long, default_value_t = Hyper::DEFAULT_TOPICS)]
    pub topics: usize,
    /// Vocabulary size.
    #[arg(long)]
    pub vocab: usize,
    #[arg(long, default_value_t = Hyper::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = Hyper::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub decay: f64,
    /// Stop after this many applied pushes and write a checkpoint.
    #[arg(long)]
    pub max_pushes: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct WorkerArgs {
    #[arg(long)]
    pub server: String,
    /// Docword file holding this worker's share of the stream.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = StreamConfig::DEFAULT_PATIENCE)]
    pub patience: usize,
    #[arg(long, default_value_t = StreamConfig::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Wait until another worker has pushed before the first fetch.
    #[arg(long)]
    pub wait_for_model: bool,
    /// Seconds to wait for a model before starting anyway.
    #[arg(long, default_value_t = 600)]
    pub wait_timeout: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated worker counts; the first is the scaling baseline.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub workers: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    /// Fixed iterations per batch.
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub docs: usize,
    #[arg(long, default_value_t = 10)]
    pub topics: usize,
    #[arg(long, default_value_t = 1000)]
    pub vocab_size: usize,
    /// Mean document length (Poisson).
    #[arg(long, default_value_t = 100.0)]
    pub doc_length: f64,
    #[arg(long, default_value_t = Hyper::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = Hyper::DEFAULT_BETA)]
    pub beta: f64,
    /// Redraw the topics after this many batches of `--drift-batch-size` documents.
    #[arg(long)]
    pub drift_after: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub drift_batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Failure classes, one per nonzero exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "data error: {e}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Invalid arguments are usage errors wherever they surface.
fn runtime(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(m) => CliError::Usage(m),
        e => CliError::Runtime(e),
    }
}

fn data(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(m) => CliError::Usage(m),
        e => CliError::Data(e),
    }
}

#[derive(Debug, Serialize)]
pub struct CorpusFingerprint {
    pub path: PathBuf,
    pub docs: usize,
    pub tokens: usize,
    pub vocab: usize,
    pub bytes: u64,
    pub sha256: String,
}

impl CorpusFingerprint {
    fn of(path: &Path, corpus: &Corpus) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| data(file_error(path, e)))?;
        Ok(CorpusFingerprint {
            path: path.to_path_buf(),
            docs: corpus.num_docs(),
            tokens: corpus.num_tokens(),
            vocab: corpus.vocab_size(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a Command,
    pub argv: Vec<String>,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub corpus: Option<CorpusFingerprint>,
    pub start_unix_ms: u128,
    pub end_unix_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn file_error(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn create_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(file_error(dir, e)))
}

fn hyper_for(model: &ModelArgs, vocab: usize) -> CliResult<Hyper> {
    Hyper::new(model.alpha, model.beta, model.topics, vocab).map_err(runtime)
}

fn load_corpus(args: &CorpusArgs) -> CliResult<(Corpus, CorpusFingerprint)> {
    let corpus = load_uci(&args.docword, args.vocab.as_deref()).map_err(data)?;
    let fp = CorpusFingerprint::of(&args.docword, &corpus)?;
    info!(
        "{}: {} documents, {} tokens, vocabulary {}",
        args.docword.display(),
        fp.docs,
        fp.tokens,
        fp.vocab
    );
    Ok((corpus, fp))
}

/// `(train, test)`; the test set is empty when the fraction is 0.
fn split(corpus: Corpus, fraction: f64, seed: u64) -> CliResult<(Corpus, Option<Corpus>)> {
    if fraction == 0.0 {
        return Ok((corpus, None));
    }
    let (train, test) = split_train_test(&corpus, fraction, seed).map_err(runtime)?;
    Ok((train, Some(test)))
}

fn write_eval(
    out: &Path,
    stats: &GlobalStats,
    test: Option<&Corpus>,
    hyper: &Hyper,
    seed: u64,
) -> CliResult<Option<f64>> {
    let Some(test) = test else { return Ok(None) };
    let config = EvalConfig {
        seed,
        ..EvalConfig::default()
    };
    let report = corpus_perplexity(&stats.phi_matrix(hyper), &test.documents, hyper, &config).map_err(runtime)?;
    let file = File::create(out.join("eval.csv")).map_err(|e| CliError::Runtime(e.into()))?;
    write_eval_csv(&report, BufWriter::new(file)).map_err(runtime)?;
    info!("held-out perplexity {:.3} over {} tokens", report.perplexity, report.heldout_tokens);
    Ok(Some(report.perplexity))
}

/// Held-out perplexity after a batch, when requested.
fn batch_heldout(stats: &GlobalStats, test: Option<&Corpus>, hyper: &Hyper, seed: u64) -> crate::Result<Option<f64>> {
    match test {
        Some(test) => {
            let config = EvalConfig {
                seed,
                ..EvalConfig::default()
            };
            Ok(Some(corpus_perplexity(&stats.phi_matrix(hyper), &test.documents, hyper, &config)?.perplexity))
        }
        None => Ok(None),
    }
}

fn log_batch(r: &BatchReport) {
    info!(
        "batch {}: {} docs, {} iterations, train perplexity {:.3}{}",
        r.index,
        r.docs,
        r.iterations,
        r.final_train_perplexity(),
        r.heldout_perplexity
            .map(|p| format!(", held-out {p:.3}"))
            .unwrap_or_default()
    );
}

fn train_cgs(args: &TrainCgsArgs) -> CliResult<(Option<u64>, Option<CorpusFingerprint>)> {
    let (corpus, fp) = load_corpus(&args.corpus)?;
    let hyper = hyper_for(&args.model, corpus.vocab_size())?;
    let (train, test) = split(corpus, args.run.test_fraction, args.run.seed)?;
    create_out(&args.run.out)?;

    let start = std::time::Instant::now();
    let mut rng = rng_from_seed(args.run.seed);
    let (stats, state) = run_cgs(&train, args.iters, &hyper, &mut rng).map_err(runtime)?;
    let wall = start.elapsed();
    let train_ppl = if train.num_tokens() > 0 {
        train_perplexity(&stats, &state, &train.documents, &hyper).map_err(runtime)?
    } else {
        f64::NAN
    };

    checkpoint::save(&args.run.out.join("model.txt"), &hyper, &stats).map_err(runtime)?;
    let heldout = write_eval(&args.run.out, &stats, test.as_ref(), &hyper, args.run.seed)?;
    let mut metrics = MetricsWriter::create_in(&args.run.out).map_err(runtime)?;
    metrics
        .write(&MetricsRecord {
            t: 1,
            iterations: args.iters,
            train_perplexity: train_ppl,
            heldout_perplexity: heldout,
            wall_ms: wall.as_secs_f64() * 1e3,
            tokens_per_sec: (train.num_tokens() * args.iters) as f64 / wall.as_secs_f64().max(1e-9),
        })
        .and_then(|_| metrics.flush())
        .map_err(runtime)?;
    Ok((Some(args.run.seed), Some(fp)))
}

fn train_sgs(args: &TrainSgsArgs) -> CliResult<(Option<u64>, Option<CorpusFingerprint>)> {
    let (corpus, fp) = load_corpus(&args.corpus)?;
    let hyper = hyper_for(&args.model, corpus.vocab_size())?;
    let config = StreamConfig {
        lambda: args.decay,
        max_iters: args.max_iters,
        patience: (args.patience > 0).then_some(args.patience),
        seed: args.run.seed,
        ..StreamConfig::new(hyper, args.batch_size)
    };
    config.validate().map_err(runtime)?;
    let (mut train, test) = split(corpus, args.run.test_fraction, args.run.seed)?;
    if args.shuffle {
        shuffle_documents(&mut train, args.run.seed);
    }
    create_out(&args.run.out)?;

    let mut metrics = MetricsWriter::create_in(&args.run.out).map_err(runtime)?;
    let batch_test = test.as_ref().filter(|_| args.batch_eval);
    let mut rng = rng_from_seed(args.run.seed);
    let stream = minibatch_stream(&train, args.batch_size).map_err(runtime)?;
    let stats = run_sgs(stream, &config, &mut rng, |report, stats| {
        report.heldout_perplexity = batch_heldout(stats, batch_test, &hyper, args.run.seed)?;
        log_batch(report);
        metrics.write(&MetricsRecord::from(&*report))
    })
    .map_err(runtime)?;
    metrics.flush().map_err(runtime)?;

    checkpoint::save(&args.run.out.join("model.txt"), &hyper, &stats).map_err(runtime)?;
    write_eval(&args.run.out, &stats, test.as_ref(), &hyper, args.run.seed)?;
    Ok((Some(args.run.seed), Some(fp)))
}

fn train_cdf(args: &TrainCdfArgs) -> CliResult<(Option<u64>, Option<CorpusFingerprint>)> {
    let (corpus, fp) = load_corpus(&args.corpus)?;
    let hyper = hyper_for(&args.model, corpus.vocab_size())?;
    let (mut train, test) = split(corpus, args.run.test_fraction, args.run.seed)?;
    if args.shuffle {
        shuffle_documents(&mut train, args.run.seed);
    }
    create_out(&args.run.out)?;

    let mut metrics = MetricsWriter::create_in(&args.run.out).map_err(runtime)?;
    let batch_test = test.as_ref().filter(|_| args.batch_eval);
    let mut rng = rng_from_seed(args.run.seed);
    let stream = minibatch_stream(&train, args.batch_size).map_err(runtime)?;
    let state = run_cdf_lda(stream, &hyper, &mut rng, |report, state| {
        report.heldout_perplexity = batch_heldout(&state.nkv_hat, batch_test, &hyper, args.run.seed)?;
        log_batch(report);
        metrics.write(&MetricsRecord::from(&*report))
    })
    .map_err(runtime)?;
    metrics.flush().map_err(runtime)?;

    checkpoint::save(&args.run.out.join("model.txt"), &hyper, &state.nkv_hat).map_err(runtime)?;
    write_eval(&args.run.out, &state.nkv_hat, test.as_ref(), &hyper, args.run.seed)?;
    Ok((Some(args.run.seed), Some(fp)))
}

fn eval(args: &EvalArgs) -> CliResult<(Option<u64>, Option<CorpusFingerprint>)> {
    let model = checkpoint::load(&args.model).map_err(data)?;
    let (corpus, fp) = load_corpus(&args.corpus)?;
    if corpus.vocab_size() != model.hyper.vocab {
        return Err(CliError::Data(Error::DimensionMismatch {
            expected_topics: model.hyper.topics,
            expected_vocab: model.hyper.vocab,
            topics: model.hyper.topics,
            vocab: corpus.vocab_size(),
        }));
    }
    create_out(&args.out)?;
    let ppl = write_eval(&args.out, &model.stats, Some(&corpus), &model.hyper, args.seed)?;
    if let Some(p) = ppl {
        println!("perplexity {p}");
    }
    Ok((Some(args.seed), Some(fp)))
}

fn serve(args: &ServeArgs) -> CliResult<(Option<u64>, Option<CorpusFingerprint>)> {
    let hyper = Hyper::new(args.alpha, args.beta, args.topics, args.vocab).map_err(runtime)?;
    create_out(&args.out)?;
    let handle = dsgs::serve_with(
        args.bind.as_str(),
        &hyper,
        args.decay,
        ServerOptions { record_pushes: false },
    )
    .map_err(runtime)?;
    println!("listening on {}", handle.local_addr());
    io::stdout().flush().ok();
    match args.max_pushes {
        Some(limit) => {
            while handle.merges() < limit {
                thread::sleep(Duration::from_millis(20));
            }
            let state = handle.shutdown();
            checkpoint::save(&args.out.join("model.txt"), &hyper, &state.stats).map_err(runtime)?;
            info!("stopped after {} pushes", state.merges);
        }
        None => handle.join(),
    }
    Ok((None, None))
}

fn worker(args: &WorkerArgs) -> CliResult<(Option<u64>, Option<CorpusFingerprint>)> {
    let corpus_args = CorpusArgs {
        docword: args.data.clone(),
        vocab: None,
    };
    let (corpus, fp) = load_corpus(&corpus_args)?;
    let hyper = hyper_for(&args.model, corpus.vocab_size())?;
    let config = StreamConfig {
        max_iters: args.max_iters,
        patience: (args.patience > 0).then_some(args.patience),
        seed: args.seed,
        ..StreamConfig::new(hyper, args.batch_size)
    };
    config.validate().map_err(runtime)?;
    create_out(&args.out)?;

    let mut metrics = MetricsWriter::create_in(&args.out).map_err(runtime)?;
    let mut client = ParameterClient::new(args.server.clone());
    if args.wait_for_model {
        wait_for_model(&mut client, Duration::from_millis(50), Duration::from_secs(args.wait_timeout)).map_err(runtime)?;
    }
    let mut rng = rng_from_seed(args.seed);
    let stream = batches(corpus.documents, args.batch_size).map_err(runtime)?;
    let summary = worker_run(&mut client, stream, &config, &mut rng, |r| match &r.batch {
        Some(b) => {
            log_batch(b);
            metrics.write(&MetricsRecord::from(b))
        }
        None => Ok(()),
    })
    .map_err(runtime)?;
    metrics.flush().map_err(runtime)?;
    info!(
        "{} batches pushed, {} failed, {} tokens",
        summary.batches_ok, summary.batches_failed, summary.tokens
    );
    if summary.batches_failed > 0 {
        return Err(CliError::Runtime(Error::Io(io::Error::other(format!(
            "{} batches could not be exchanged with {}",
            summary.batches_failed, args.server
        )))));
    }
    Ok((Some(args.seed), Some(fp)))
}

fn bench(args: &BenchArgs) -> CliResult<(Option<u64>, Option<CorpusFingerprint>)> {
    let (corpus, fp) = load_corpus(&args.corpus)?;
    let hyper = hyper_for(&args.model, corpus.vocab_size())?;
    let config = StreamConfig {
        max_iters: args.iters,
        patience: None,
        seed: args.seed,
        ..StreamConfig::new(hyper, args.batch_size)
    };
    create_out(&args.out)?;
    let rows = dsgs::bench(&corpus.documents, &args.workers, &config).map_err(runtime)?;
    let file = File::create(args.out.join("bench.csv")).map_err(|e| CliError::Runtime(e.into()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in &rows {
        println!(
            "workers {:>3}  tokens/s {:>12.1}  ideal {:>12.1}",
            row.workers, row.tokens_per_sec, row.ideal_tokens_per_sec
        );
        w.serialize(row)
            .map_err(|e| CliError::Runtime(Error::Io(io::Error::other(e))))?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.into()))?;
    Ok((Some(args.seed), Some(fp)))
}

fn synth(args: &SynthArgs) -> CliResult<(Option<u64>, Option<CorpusFingerprint>)> {
    let spec = GenSpec {
        alpha: args.alpha,
        beta: args.beta,
        seed: args.seed,
        drift: args.drift_after.map(|after_batch| Drift {
            batch_size: args.drift_batch_size,
            after_batch,
        }),
        ..GenSpec::new(args.docs, args.topics, args.vocab_size, DocLength::Poisson(args.doc_length))
    };
    let synthetic = generate(&spec).map_err(runtime)?;
    create_out(&args.out)?;
    let docword = args.out.join("docword.txt");
    let open = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| CliError::Runtime(file_error(p, e)));
    write_uci(&synthetic.corpus, open(&docword)?, open(&args.out.join("vocab.txt"))?).map_err(runtime)?;
    let fp = CorpusFingerprint::of(&docword, &synthetic.corpus)?;
    Ok((Some(args.seed), Some(fp)))
}

fn out_dir(command: &Command) -> &Path {
    match command {
        Command::TrainCgs(a) => &a.run.out,
        Command::TrainSgs(a) => &a.run.out,
        Command::TrainCdf(a) => &a.run.out,
        Command::Eval(a) => &a.out,
        Command::Serve(a) => &a.out,
        Command::Worker(a) => &a.out,
        Command::Bench(a) => &a.out,
        Command::Synth(a) => &a.out,
    }
}

/// Execute a parsed command and write its manifest.
pub fn execute(cli: &Cli, argv: Vec<String>) -> CliResult<()> {
    let start = now_ms();
    let (seed, corpus) = match &cli.command {
        Command::TrainCgs(a) => train_cgs(a),
        Command::TrainSgs(a) => train_sgs(a),
        Command::TrainCdf(a) => train_cdf(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
        Command::Worker(a) => worker(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
    }?;
    let manifest = RunManifest {
        command: &cli.command,
        argv,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        corpus,
        start_unix_ms: start,
        end_unix_ms: now_ms(),
    };
    let path = out_dir(&cli.command).join("manifest.json");
    let file = File::create(&path).map_err(|e| CliError::Runtime(file_error(&path, e)))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest)
        .map_err(|e| CliError::Runtime(Error::Io(e.into())))?;
    Ok(())
}

/// Parse `args` (program name first) and run.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let argv = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("streamlda: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    run(std::env::args_os())
}
