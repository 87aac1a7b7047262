//! Held-out perplexity.
//!
//! Each test document is split in two. Topic proportions are inferred from
//! the first half by Gibbs sampling with the topic-word matrix held fixed,
//! and the second half is scored under the resulting mixture:
//!
//! ```text
//! log p(w) = log sum_k phi[k][w] * theta[k]
//! perplexity = exp(-sum log p / number of scored tokens)
//! ```

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{split_tokens_half, Document};
use crate::sampler::draw_categorical;
use crate::stats::{Hyper, PhiMatrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalConfig {
    pub foldin_sweeps: usize,
    /// Number of final sweeps whose theta estimates are averaged.
    pub foldin_tail: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            foldin_sweeps: 50,
            foldin_tail: 20,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.foldin_tail == 0 || self.foldin_tail > self.foldin_sweeps {
            return Err(Error::InvalidArgument(format!(
                "fold-in tail {} must lie in [1, sweeps = {}]",
                self.foldin_tail, self.foldin_sweeps
            )));
        }
        Ok(())
    }

    /// Independent generator for one document, so results do not depend on
    /// evaluation order.
    pub fn doc_rng(&self, doc_id: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(doc_id as u64);
        rng
    }
}

/// Infer a document's topic proportions from `observed` tokens with `phi`
/// fixed.
pub fn fold_in_theta<R: Rng + ?Sized>(
    phi: &PhiMatrix,
    observed: &[usize],
    hyper: &Hyper,
    config: &EvalConfig,
    rng: &mut R,
) -> Vec<f64> {
    let k_topics = phi.topics();
    if observed.is_empty() {
        return vec![1.0 / k_topics as f64; k_topics];
    }
    let mut ndk = vec![0u32; k_topics];
    let mut z = Vec::with_capacity(observed.len());
    let mut weights = vec![0.0; k_topics];
    let draw = |ndk: &[u32], v: usize, weights: &mut [f64], rng: &mut R| {
        let mut total = 0.0;
        for (k, w) in weights.iter_mut().enumerate() {
            *w = (ndk[k] as f64 + hyper.alpha) * phi.get(k, v);
            total += *w;
        }
        draw_categorical(weights, total, rng)
    };
    for &v in observed {
        let k = draw(&ndk, v, &mut weights, rng);
        ndk[k] += 1;
        z.push(k);
    }

    let nd = observed.len() as f64;
    let denom = nd + k_topics as f64 * hyper.alpha;
    let burn_in = config.foldin_sweeps - config.foldin_tail.min(config.foldin_sweeps);
    let mut avg = vec![0.0; k_topics];
    let mut kept = 0usize;
    for s in 0..config.foldin_sweeps {
        for (i, &v) in observed.iter().enumerate() {
            ndk[z[i]] -= 1;
            let k = draw(&ndk, v, &mut weights, rng);
            ndk[k] += 1;
            z[i] = k;
        }
        if s >= burn_in {
            for (a, &n) in avg.iter_mut().zip(&ndk) {
                *a += (n as f64 + hyper.alpha) / denom;
            }
            kept += 1;
        }
    }
    if kept == 0 {
        return ndk.iter().map(|&n| (n as f64 + hyper.alpha) / denom).collect();
    }
    avg.iter_mut().for_each(|a| *a /= kept as f64);
    avg
}

/// `sum_i log sum_k phi[k][w_i] theta[k]` over the held-out tokens.
pub fn doc_log_likelihood(phi: &PhiMatrix, theta: &[f64], heldout: &[usize]) -> Result<f64> {
    let mut ll = 0.0;
    for &v in heldout {
        let p: f64 = theta.iter().enumerate().map(|(k, t)| phi.get(k, v) * t).sum();
        if p.is_nan() || p <= 0.0 {
            return Err(Error::ZeroProbability { word: v });
        }
        ll += p.ln();
    }
    Ok(ll)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DocPerplexity {
    pub doc_id: usize,
    pub heldout_tokens: usize,
    pub log_likelihood: f64,
    pub perplexity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerplexityReport {
    pub per_doc: Vec<DocPerplexity>,
    pub heldout_tokens: usize,
    /// Token-weighted corpus perplexity.
    pub perplexity: f64,
    /// Unweighted mean of the per-document perplexities.
    pub mean_doc_perplexity: f64,
}

/// Score the second half of every test document. Documents whose held-out
/// half is empty are skipped.
pub fn corpus_perplexity(
    phi: &PhiMatrix,
    test_docs: &[Document],
    hyper: &Hyper,
    config: &EvalConfig,
) -> Result<PerplexityReport> {
    config.validate()?;
    let mut per_doc = Vec::new();
    for doc in test_docs {
        let (observed, heldout) = split_tokens_half(doc);
        if heldout.is_empty() {
            continue;
        }
        let theta = fold_in_theta(phi, observed, hyper, config, &mut config.doc_rng(doc.id));
        let ll = doc_log_likelihood(phi, &theta, heldout)?;
        per_doc.push(DocPerplexity {
            doc_id: doc.id,
            heldout_tokens: heldout.len(),
            log_likelihood: ll,
            perplexity: (-ll / heldout.len() as f64).exp(),
        });
    }
    let heldout_tokens: usize = per_doc.iter().map(|d| d.heldout_tokens).sum();
    if heldout_tokens == 0 {
        return Err(Error::NoHeldoutTokens);
    }
    let total_ll: f64 = per_doc.iter().map(|d| d.log_likelihood).sum();
    let mean_doc_perplexity = per_doc.iter().map(|d| d.perplexity).sum::<f64>() / per_doc.len() as f64;
    Ok(PerplexityReport {
        heldout_tokens,
        perplexity: (-total_ll / heldout_tokens as f64).exp(),
        mean_doc_perplexity,
        per_doc,
    })
}

#[derive(Serialize)]
struct EvalRow<'a> {
    doc_id: &'a str,
    heldout_tokens: usize,
    perplexity: f64,
}

/// CSV with one row per scored document, then a `corpus` row (token-weighted)
/// and a `doc_mean` row (unweighted mean over documents).
pub fn write_eval_csv<W: Write>(report: &PerplexityReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    for d in &report.per_doc {
        let id = d.doc_id.to_string();
        w.serialize(EvalRow {
            doc_id: &id,
            heldout_tokens: d.heldout_tokens,
            perplexity: d.perplexity,
        })
        .map_err(csv_err)?;
    }
    w.serialize(EvalRow {
        doc_id: "corpus",
        heldout_tokens: report.heldout_tokens,
        perplexity: report.perplexity,
    })
    .map_err(csv_err)?;
    w.serialize(EvalRow {
        doc_id: "doc_mean",
        heldout_tokens: report.heldout_tokens,
        perplexity: report.mean_doc_perplexity,
    })
    .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}
