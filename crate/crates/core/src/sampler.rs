//! Collapsed Gibbs sampling.
//!
//! The conditional of one token's topic given everything else is
//!
//! ```text
//! p(z = k | rest) ∝ (N_dk + alpha) * (N_kv + beta) / (N_k + V beta)
//! ```
//!
//! with the token's own contribution removed from all counts. The sampler
//! implements the removal literally: decrement, draw, increment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document};
use crate::stats::{DocState, GlobalStats, Hyper};
use crate::{Error, Result};

/// The generator used throughout the crate. Same seed and same call
/// sequence give the same draws on every platform.
pub type SamplerRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SamplerRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Topic assignments for the documents of one mini-batch, aligned by position.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchState {
    pub docs: Vec<DocState>,
}

/// Normalized conditional distribution over topics for a token of word `v`
/// in `doc`. With `exclude = Some(k)` the counts are read as if one token of
/// word `v` assigned to `k` were absent.
pub fn conditional_probs(
    stats: &GlobalStats,
    doc: &DocState,
    v: usize,
    hyper: &Hyper,
    exclude: Option<usize>,
) -> Result<Vec<f64>> {
    let vocab_beta = hyper.vocab_beta();
    let mut p: Vec<f64> = (0..hyper.topics)
        .map(|k| {
            let own = if exclude == Some(k) { 1.0 } else { 0.0 };
            (doc.ndk[k] as f64 - own + hyper.alpha) * (stats.count(k, v) - own + hyper.beta)
                / (stats.total(k) - own + vocab_beta)
        })
        .collect();
    let total: f64 = p.iter().sum();
    if !(total.is_finite() && total > 0.0) || p.iter().any(|&x| x < 0.0) {
        return Err(Error::NonFinite { word: v });
    }
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// Unnormalized conditional into `weights`; returns the total.
#[inline]
fn fill_weights(stats: &GlobalStats, doc: &DocState, v: usize, hyper: &Hyper, weights: &mut [f64]) -> f64 {
    let vocab_beta = hyper.vocab_beta();
    let mut total = 0.0;
    for (k, w) in weights.iter_mut().enumerate() {
        *w = (doc.ndk[k] as f64 + hyper.alpha) * (stats.count(k, v) + hyper.beta)
            / (stats.total(k) + vocab_beta);
        total += *w;
    }
    total
}

/// Draw an index from unnormalized `weights` by a linear scan over the
/// cumulative sum with one uniform draw.
pub fn draw_categorical<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    // u landed in the rounding gap at the top; take the last positive weight.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

fn draw_topic<R: Rng + ?Sized>(
    stats: &GlobalStats,
    doc: &DocState,
    v: usize,
    hyper: &Hyper,
    weights: &mut [f64],
    rng: &mut R,
) -> Result<usize> {
    let total = fill_weights(stats, doc, v, hyper, weights);
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NonFinite { word: v });
    }
    Ok(draw_categorical(weights, total, rng))
}

fn resample_with<R: Rng + ?Sized>(
    stats: &mut GlobalStats,
    state: &mut DocState,
    doc: &Document,
    position: usize,
    hyper: &Hyper,
    weights: &mut [f64],
    rng: &mut R,
) -> Result<usize> {
    let v = doc.tokens[position];
    let old = state.assignments[position];
    stats.remove_token(state, old, v)?;
    let new = match draw_topic(stats, state, v, hyper, weights, rng) {
        Ok(k) => k,
        Err(e) => {
            stats.add_token(state, old, v);
            return Err(e);
        }
    };
    stats.add_token(state, new, v);
    state.assignments[position] = new;
    Ok(new)
}

/// Resample the topic of one already assigned token and return the new topic.
pub fn resample_token<R: Rng + ?Sized>(
    stats: &mut GlobalStats,
    state: &mut DocState,
    doc: &Document,
    position: usize,
    hyper: &Hyper,
    rng: &mut R,
) -> Result<usize> {
    let mut weights = vec![0.0; hyper.topics];
    resample_with(stats, state, doc, position, hyper, &mut weights, rng)
}

/// Assign every token of `docs` by sampling from the conditional given all
/// counts accumulated so far, adding each token's counts right after its draw.
pub fn progressive_init<R: Rng + ?Sized>(
    stats: &mut GlobalStats,
    docs: &[Document],
    hyper: &Hyper,
    rng: &mut R,
) -> Result<BatchState> {
    let mut weights = vec![0.0; hyper.topics];
    let mut states = Vec::with_capacity(docs.len());
    for doc in docs {
        let mut state = DocState::new(hyper.topics);
        state.assignments.reserve_exact(doc.len());
        for &v in &doc.tokens {
            let k = draw_topic(stats, &state, v, hyper, &mut weights, rng)?;
            stats.add_token(&mut state, k, v);
            state.assignments.push(k);
        }
        states.push(state);
    }
    Ok(BatchState { docs: states })
}

/// Resample every token once, documents in order, positions in order.
pub fn sweep<R: Rng + ?Sized>(
    stats: &mut GlobalStats,
    batch: &mut BatchState,
    docs: &[Document],
    hyper: &Hyper,
    rng: &mut R,
) -> Result<()> {
    debug_assert_eq!(batch.docs.len(), docs.len());
    let mut weights = vec![0.0; hyper.topics];
    for (state, doc) in batch.docs.iter_mut().zip(docs) {
        for position in 0..doc.len() {
            resample_with(stats, state, doc, position, hyper, &mut weights, rng)?;
        }
    }
    Ok(())
}

/// Batch CGS over the whole corpus. The progressive initialization counts as
/// the first of `iterations`; the remaining ones are full sweeps.
pub fn run_cgs<R: Rng + ?Sized>(
    corpus: &Corpus,
    iterations: usize,
    hyper: &Hyper,
    rng: &mut R,
) -> Result<(GlobalStats, BatchState)> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("CGS needs at least one iteration".into()));
    }
    let mut stats = GlobalStats::new(hyper.topics, hyper.vocab);
    let mut batch = progressive_init(&mut stats, &corpus.documents, hyper, rng)?;
    for _ in 1..iterations {
        sweep(&mut stats, &mut batch, &corpus.documents, hyper, rng)?;
    }
    Ok((stats, batch))
}
