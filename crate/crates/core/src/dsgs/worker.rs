use std::io::{BufReader, BufWriter};
use std::net::TcpStream;
use std::thread;
use std::time::Duration;

use log::{error, warn};
use rand::Rng;

use super::wire::{read_message, write_message, WireError, WireMessage};
use crate::corpus::MiniBatch;
use crate::stats::{delta_between, GlobalStats};
use crate::streaming::{process_minibatch, BatchReport, StreamConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    pub attempts: usize,
    /// Wait before the second attempt; doubled for each further one.
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(50),
        }
    }
}

/// Global statistics as served by a FETCH.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub lambda: f64,
    pub stats: GlobalStats,
}

type Connection = (BufReader<TcpStream>, BufWriter<TcpStream>);

/// Request/response client for the parameter server. Connects lazily and
/// reconnects after transport errors.
pub struct ParameterClient {
    addr: String,
    retry: RetryPolicy,
    conn: Option<Connection>,
}

impl ParameterClient {
    pub fn new(addr: impl Into<String>) -> Self {
        Self::with_retry(addr, RetryPolicy::default())
    }

    pub fn with_retry(addr: impl Into<String>, retry: RetryPolicy) -> Self {
        ParameterClient {
            addr: addr.into(),
            retry,
            conn: None,
        }
    }

    fn connection(&mut self) -> Result<&mut Connection> {
        if self.conn.is_none() {
            let stream = TcpStream::connect(&self.addr)?;
            stream.set_nodelay(true)?;
            self.conn = Some((BufReader::new(stream.try_clone()?), BufWriter::new(stream)));
        }
        Ok(self.conn.as_mut().expect("just connected"))
    }

    fn exchange_once(&mut self, msg: &WireMessage) -> Result<WireMessage> {
        let (reader, writer) = self.connection()?;
        write_message(writer, msg)?;
        read_message(reader)?.ok_or_else(|| {
            WireError::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "server closed the connection",
            ))
            .into()
        })
    }

    fn exchange(&mut self, msg: &WireMessage) -> Result<WireMessage> {
        let mut backoff = self.retry.initial_backoff;
        let mut last = None;
        for attempt in 0..self.retry.attempts.max(1) {
            if attempt > 0 {
                thread::sleep(backoff);
                backoff *= 2;
            }
            match self.exchange_once(msg) {
                Ok(reply) => return Ok(reply),
                Err(e) => {
                    warn!("{}: attempt {} failed: {e}", self.addr, attempt + 1);
                    self.conn = None;
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }

    pub fn fetch(&mut self) -> Result<Snapshot> {
        match self.exchange(&WireMessage::Fetch)? {
            WireMessage::Snapshot {
                topics,
                vocab,
                lambda,
                entries,
            } => Ok(Snapshot {
                lambda,
                stats: GlobalStats::from_entries(topics as usize, vocab as usize, &entries)?,
            }),
            other => Err(unexpected(&other)),
        }
    }

    /// Push a delta; returns whether the server applied it.
    pub fn push(&mut self, delta: &crate::stats::SparseDelta) -> Result<bool> {
        let msg = WireMessage::Push {
            entries: delta.entries.clone(),
        };
        match self.exchange(&msg)? {
            WireMessage::Ack { applied } => Ok(applied),
            other => Err(unexpected(&other)),
        }
    }
}

/// Poll until the server holds a non-empty model, or until `timeout`.
/// Returns whether a model appeared.
///
/// Workers that all start from an empty server pick their topic labels
/// independently, and the server then sums mismatched labelings. Letting one
/// worker push first gives everyone a shared labeling to build on.
pub fn wait_for_model(client: &mut ParameterClient, poll: Duration, timeout: Duration) -> Result<bool> {
    let start = std::time::Instant::now();
    loop {
        if client.fetch()?.stats.total_mass() > 0.0 {
            return Ok(true);
        }
        if start.elapsed() >= timeout {
            warn!("no model on {} after {timeout:?}; starting cold", client.addr);
            return Ok(false);
        }
        thread::sleep(poll);
    }
}

fn unexpected(msg: &WireMessage) -> Error {
    Error::Wire(WireError::Io(std::io::Error::other(format!(
        "unexpected reply with tag {}",
        msg.tag()
    ))))
}

/// Outcome of one mini-batch on a worker.
#[derive(Clone, Debug)]
pub struct WorkerReport {
    pub index: usize,
    pub tokens: usize,
    /// Present when the batch was sampled and its delta applied.
    pub batch: Option<BatchReport>,
    pub pushed_entries: usize,
    pub pushed_mass: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorkerSummary {
    pub batches_ok: usize,
    pub batches_failed: usize,
    pub tokens: usize,
}

/// Run a worker over its local stream: fetch, sample locally without decay,
/// push the difference, repeat. A batch whose exchange keeps failing after
/// the retries is reported and skipped.
pub fn worker_run<I, R, F>(
    client: &mut ParameterClient,
    stream: I,
    config: &StreamConfig,
    rng: &mut R,
    mut sink: F,
) -> Result<WorkerSummary>
where
    I: IntoIterator<Item = MiniBatch>,
    R: Rng + ?Sized,
    F: FnMut(&WorkerReport) -> Result<()>,
{
    let local = StreamConfig {
        lambda: 1.0,
        ..config.clone()
    };
    local.validate()?;
    let mut summary = WorkerSummary::default();
    for batch in stream {
        let tokens = batch.num_tokens();
        let outcome = (|| -> Result<(BatchReport, usize, f64)> {
            let snapshot = client.fetch()?;
            let before = snapshot.stats;
            if before.topics() != local.hyper.topics || before.vocab() != local.hyper.vocab {
                return Err(Error::DimensionMismatch {
                    expected_topics: local.hyper.topics,
                    expected_vocab: local.hyper.vocab,
                    topics: before.topics(),
                    vocab: before.vocab(),
                });
            }
            let mut after = before.clone();
            let report = process_minibatch(&mut after, &batch, &local, rng)?;
            let delta = delta_between(&before, &after)?;
            if !client.push(&delta)? {
                return Err(Error::PushRejected);
            }
            Ok((report, delta.len(), delta.total_mass()))
        })();
        let report = match outcome {
            Ok((report, entries, mass)) => {
                summary.batches_ok += 1;
                summary.tokens += tokens;
                WorkerReport {
                    index: batch.index,
                    tokens,
                    batch: Some(report),
                    pushed_entries: entries,
                    pushed_mass: mass,
                    error: None,
                }
            }
            Err(e) => {
                error!("batch {} aborted: {e}", batch.index);
                summary.batches_failed += 1;
                WorkerReport {
                    index: batch.index,
                    tokens,
                    batch: None,
                    pushed_entries: 0,
                    pushed_mass: 0.0,
                    error: Some(e.to_string()),
                }
            }
        };
        sink(&report)?;
    }
    Ok(summary)
}
