//! Distributed streaming Gibbs sampling over a parameter server.
//!
//! The server holds the global topic-word counts. A worker fetches them,
//! runs the streaming sampler on one of its own mini-batches against that
//! local copy (without decay), and pushes the sparse difference back. The
//! server applies `N = lambda * (N + delta)` under an exclusive lock, so
//! pushes are serialized in arrival order and every snapshot reflects a
//! prefix of that order. Workers never talk to each other.
//!
//! Starting every worker against an empty server lets each one invent its
//! own topic labeling for its first batch, and the sum of those labelings
//! is a blurred model that later batches never undo. By default the
//! in-process runner therefore lets one worker push a first batch before the
//! others fetch; see [`Start`].

pub mod server;
pub mod wire;
pub mod worker;

use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::corpus::{batches, Document};
use crate::sampler::rng_from_seed;
use crate::stats::{GlobalStats, SparseDelta};
use crate::streaming::StreamConfig;
use crate::{Error, Result};

pub use self::server::{replay, serve, serve_with, ServerHandle, ServerOptions, ServerState};
pub use self::wire::{WireError, WireMessage};
pub use self::worker::{
    wait_for_model, worker_run, ParameterClient, RetryPolicy, Snapshot, WorkerReport, WorkerSummary,
};

/// Result of a complete in-process run.
#[derive(Clone, Debug)]
pub struct DsgsRun {
    pub stats: GlobalStats,
    pub merges: u64,
    pub push_log: Vec<SparseDelta>,
    pub workers: Vec<WorkerSummary>,
    pub wall: Duration,
    pub tokens: usize,
}

impl DsgsRun {
    pub fn tokens_per_sec(&self) -> f64 {
        self.tokens as f64 / self.wall.as_secs_f64().max(1e-9)
    }
}

/// How workers begin when the server is still empty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Start {
    /// The first worker with data pushes one batch before the others fetch.
    #[default]
    Bootstrap,
    /// Every worker starts immediately, possibly from an empty model.
    Cold,
}

/// Longest a waiting worker polls for the bootstrap push.
const BOOTSTRAP_TIMEOUT: Duration = Duration::from_secs(600);

/// Start a loopback server and one worker thread per shard, wait for all of
/// them, and return the server's final state. Worker `i` seeds its
/// generator with `config.seed + i`; `config.lambda` is the server's decay.
pub fn run_in_process(shards: Vec<Vec<Document>>, config: &StreamConfig) -> Result<DsgsRun> {
    run_in_process_with(shards, config, Start::default())
}

pub fn run_in_process_with(shards: Vec<Vec<Document>>, config: &StreamConfig, start_mode: Start) -> Result<DsgsRun> {
    config.validate()?;
    let bootstrap = shards.iter().position(|s| s.iter().any(|d| !d.is_empty()));
    let server = serve_with(
        "127.0.0.1:0",
        &config.hyper,
        config.lambda,
        ServerOptions { record_pushes: true },
    )?;
    let addr = server.local_addr().to_string();
    let tokens: usize = shards.iter().flatten().map(Document::len).sum();

    let start = Instant::now();
    let handles: Vec<_> = shards
        .into_iter()
        .enumerate()
        .map(|(i, shard)| {
            let addr = addr.clone();
            let config = config.clone();
            thread::Builder::new()
                .name(format!("dsgs-worker-{i}"))
                .spawn(move || -> Result<WorkerSummary> {
                    let mut client = ParameterClient::new(addr);
                    if start_mode == Start::Bootstrap && bootstrap.is_some_and(|b| b != i) {
                        wait_for_model(&mut client, Duration::from_millis(5), BOOTSTRAP_TIMEOUT)?;
                    }
                    let mut rng = rng_from_seed(config.seed.wrapping_add(i as u64));
                    let stream = batches(shard, config.batch_size)?;
                    worker_run(&mut client, stream, &config, &mut rng, |_| Ok(()))
                })
        })
        .collect::<std::io::Result<_>>()?;
    let mut workers = Vec::with_capacity(handles.len());
    for h in handles {
        let summary = h
            .join()
            .map_err(|_| Error::Io(std::io::Error::other("worker thread panicked")))??;
        workers.push(summary);
    }
    let wall = start.elapsed();

    let state = server.shutdown();
    Ok(DsgsRun {
        stats: state.stats,
        merges: state.merges,
        push_log: state.push_log.unwrap_or_default(),
        workers,
        wall,
        tokens,
    })
}

/// Split documents into `parts` contiguous, nearly equal shards.
pub fn shard_documents(docs: &[Document], parts: usize) -> Vec<Vec<Document>> {
    let parts = parts.max(1);
    let base = docs.len() / parts;
    let extra = docs.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        out.push(docs[start..start + len].to_vec());
        start += len;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub workers: usize,
    pub tokens: usize,
    pub seconds: f64,
    pub tokens_per_sec: f64,
    /// Single-worker throughput times the number of workers.
    pub ideal_tokens_per_sec: f64,
}

/// Throughput of in-process DSGS for each worker count. The first count is
/// the baseline for the ideal-scaling column.
pub fn bench(docs: &[Document], worker_counts: &[usize], config: &StreamConfig) -> Result<Vec<BenchRow>> {
    let mut rows: Vec<BenchRow> = Vec::new();
    let mut single = None;
    for &p in worker_counts {
        if p == 0 {
            return Err(Error::InvalidArgument("worker count must be at least 1".into()));
        }
        let run = run_in_process(shard_documents(docs, p), config)?;
        let tps = run.tokens_per_sec();
        let per_worker = *single.get_or_insert(tps / p as f64);
        rows.push(BenchRow {
            workers: p,
            tokens: run.tokens,
            seconds: run.wall.as_secs_f64(),
            tokens_per_sec: tps,
            ideal_tokens_per_sec: per_worker * p as f64,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shards_cover_everything() {
        let docs: Vec<Document> = (0..10).map(|i| Document::new(i, vec![])).collect();
        let s = shard_documents(&docs, 4);
        assert_eq!(s.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 2, 2]);
        let ids: Vec<usize> = s.iter().flatten().map(|d| d.id).collect();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
    }
}
