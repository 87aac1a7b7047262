//! Streaming inference for latent Dirichlet allocation.
//!
//! The crate implements collapsed Gibbs sampling (CGS) for LDA together with
//! its streaming extension (SGS), which processes the corpus as a sequence of
//! mini-batches, keeps only the topic-word sufficient statistics between
//! batches and optionally decays them to forget stale history. Around that
//! core sit:
//!
//! - [`corpus`]: UCI bag-of-words ingestion, train/test splits and mini-batch streams,
//! - [`stats`]: sparse topic-word counts with decay, delta extraction and posterior means,
//! - [`sampler`]: the collapsed conditional, progressive initialization and batch CGS,
//! - [`streaming`]: the per-mini-batch driver with its convergence rule,
//! - [`cdf`]: the conditional density filtering baseline for LDA,
//! - [`eval`]: held-out perplexity with fold-in inference,
//! - [`dsgs`]: a parameter server and hogwild workers exchanging sparse deltas,
//! - [`synth`]: a forward sampler of the LDA generative process.
//!
//! The `examples/` directory of this crate has one runnable program per
//! capability; the `streamlda` binary wraps the same pieces as subcommands.

pub mod cdf;
pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod dsgs;
mod error;
pub mod eval;
pub mod metrics;
pub mod sampler;
pub mod stats;
pub mod streaming;
pub mod synth;

pub use crate::error::{Error, Result};
