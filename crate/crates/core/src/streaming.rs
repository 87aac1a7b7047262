//! Streaming Gibbs sampling.
//!
//! Each arriving mini-batch is initialized progressively against the counts
//! of everything seen so far, swept until its training perplexity stops
//! improving, and then folded into the global statistics, which are decayed
//! once. Assignments of earlier batches are never revisited and are dropped
//! when their batch finishes, so memory is bounded by the batch size.

use std::time::{Duration, Instant};

use rand::Rng;

use crate::corpus::{Document, MiniBatch};
use crate::sampler::{progressive_init, sweep, BatchState};
use crate::stats::{check_lambda, GlobalStats, Hyper};
use crate::{Error, Result};

/// Minimum relative decrease that counts as an improvement of the best
/// training perplexity.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct StreamConfig {
    pub hyper: Hyper,
    pub batch_size: usize,
    /// Decay applied to the global counts after every batch.
    pub lambda: f64,
    /// Cap on iterations per batch, the initialization pass included.
    pub max_iters: usize,
    /// Stop after this many consecutive non-improving iterations; `None`
    /// always runs `max_iters`.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl StreamConfig {
    pub const DEFAULT_MAX_ITERS: usize = 400;
    pub const DEFAULT_PATIENCE: usize = 10;

    pub fn new(hyper: Hyper, batch_size: usize) -> Self {
        StreamConfig {
            hyper,
            batch_size,
            lambda: 1.0,
            max_iters: Self::DEFAULT_MAX_ITERS,
            patience: Some(Self::DEFAULT_PATIENCE),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::InvalidArgument("patience must be at least 1 (use None to disable)".into()));
        }
        Ok(())
    }
}

/// Stopping rule over a sequence of per-iteration training perplexities.
#[derive(Clone, Debug)]
pub struct ConvergenceMonitor {
    max_iters: usize,
    patience: Option<usize>,
    best: f64,
    stale: usize,
    iterations: usize,
}

impl ConvergenceMonitor {
    pub fn new(max_iters: usize, patience: Option<usize>) -> Self {
        ConvergenceMonitor {
            max_iters,
            patience,
            best: f64::INFINITY,
            stale: 0,
            iterations: 0,
        }
    }

    /// Record the perplexity after one more iteration. Returns `true` while
    /// another iteration should run.
    pub fn record(&mut self, perplexity: f64) -> bool {
        self.iterations += 1;
        if perplexity < self.best * (1.0 - IMPROVEMENT_TOLERANCE) {
            self.best = perplexity;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        !self.converged() && self.iterations < self.max_iters
    }

    /// True once `patience` consecutive iterations failed to improve.
    pub fn converged(&self) -> bool {
        self.patience.is_some_and(|p| self.stale >= p)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchReport {
    /// 1-based batch index.
    pub index: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Training perplexity after each iteration.
    pub train_perplexity: Vec<f64>,
    pub wall: Duration,
    pub docs: usize,
    pub tokens: usize,
    /// Posterior mean topic proportions of each document, taken before decay.
    pub theta: Vec<Vec<f64>>,
    /// Filled in by callers that evaluate a held-out set after the batch.
    pub heldout_perplexity: Option<f64>,
}

impl BatchReport {
    pub fn final_train_perplexity(&self) -> f64 {
        self.train_perplexity.last().copied().unwrap_or(f64::NAN)
    }

    pub fn tokens_per_sec(&self) -> f64 {
        self.tokens as f64 / self.wall.as_secs_f64().max(1e-9)
    }
}

/// Perplexity of the batch's own tokens under the current posterior means.
pub fn train_perplexity(
    stats: &GlobalStats,
    batch: &BatchState,
    docs: &[Document],
    hyper: &Hyper,
) -> Result<f64> {
    let vocab_beta = hyper.vocab_beta();
    let denoms: Vec<f64> = stats.totals().iter().map(|t| t + vocab_beta).collect();
    let mut log_lik = 0.0;
    let mut tokens = 0usize;
    for (state, doc) in batch.docs.iter().zip(docs) {
        let theta = state.theta(hyper);
        for &v in &doc.tokens {
            let p: f64 = (0..hyper.topics)
                .map(|k| (stats.count(k, v) + hyper.beta) / denoms[k] * theta[k])
                .sum();
            if p.is_nan() || p <= 0.0 {
                return Err(Error::ZeroProbability { word: v });
            }
            log_lik += p.ln();
        }
        tokens += doc.len();
    }
    if tokens == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok((-log_lik / tokens as f64).exp())
}

/// Run one mini-batch against `stats`, then decay.
pub fn process_minibatch<R: Rng + ?Sized>(
    stats: &mut GlobalStats,
    batch: &MiniBatch,
    config: &StreamConfig,
    rng: &mut R,
) -> Result<BatchReport> {
    config.validate()?;
    let hyper = &config.hyper;
    let start = Instant::now();
    let tokens = batch.num_tokens();

    let mut monitor = ConvergenceMonitor::new(config.max_iters, config.patience);
    let mut trace = Vec::new();
    let mut state = progressive_init(stats, &batch.docs, hyper, rng)?;
    if tokens > 0 {
        let mut more = {
            let ppl = train_perplexity(stats, &state, &batch.docs, hyper)?;
            trace.push(ppl);
            monitor.record(ppl)
        };
        while more {
            sweep(stats, &mut state, &batch.docs, hyper, rng)?;
            let ppl = train_perplexity(stats, &state, &batch.docs, hyper)?;
            trace.push(ppl);
            more = monitor.record(ppl);
        }
    }
    let theta = state.docs.iter().map(|d| d.theta(hyper)).collect();
    stats.apply_decay(config.lambda)?;

    Ok(BatchReport {
        index: batch.index,
        iterations: monitor.iterations().max(1),
        converged: monitor.converged(),
        train_perplexity: trace,
        wall: start.elapsed(),
        docs: batch.docs.len(),
        tokens,
        theta,
        heldout_perplexity: None,
    })
}

/// Process a stream of mini-batches starting from `stats`. The sink sees
/// every report together with the statistics right after that batch.
pub fn run_sgs_from<I, R, F>(
    mut stats: GlobalStats,
    stream: I,
    config: &StreamConfig,
    rng: &mut R,
    mut sink: F,
) -> Result<GlobalStats>
where
    I: IntoIterator<Item = MiniBatch>,
    R: Rng + ?Sized,
    F: FnMut(&mut BatchReport, &GlobalStats) -> Result<()>,
{
    config.validate()?;
    for batch in stream {
        let mut report = process_minibatch(&mut stats, &batch, config, rng)?;
        drop(batch);
        sink(&mut report, &stats)?;
    }
    Ok(stats)
}

/// Process a stream of mini-batches from fresh statistics.
pub fn run_sgs<I, R, F>(stream: I, config: &StreamConfig, rng: &mut R, sink: F) -> Result<GlobalStats>
where
    I: IntoIterator<Item = MiniBatch>,
    R: Rng + ?Sized,
    F: FnMut(&mut BatchReport, &GlobalStats) -> Result<()>,
{
    let stats = GlobalStats::new(config.hyper.topics, config.hyper.vocab);
    run_sgs_from(stats, stream, config, rng, sink)
}
