//! Conditional density filtering for LDA.
//!
//! A per-document baseline: topics of a document's tokens are sampled
//! against an explicit topic-word matrix `phi`, the document's final
//! assignments are added to the surrogate counts `nkv_hat`, and every row of
//! `phi` is then redrawn from `Dir(nkv_hat[k] + beta)`. Each document gets a
//! single sampling pass and is never revisited.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::corpus::{Document, MiniBatch};
use crate::sampler::{draw_categorical, BatchState};
use crate::stats::{DocState, GlobalStats, Hyper, PhiMatrix};
use crate::streaming::{train_perplexity, BatchReport};
use crate::{Error, Result};

/// Draw from a Dirichlet distribution by normalizing independent Gamma
/// variates.
///
/// Variates are generated in log space: for shape `a < 1`,
/// `Gamma(a) = Gamma(a + 1) * U^(1/a)`, which keeps very small
/// concentrations (such as `beta = 0.03`) from underflowing the whole vector
/// to zero. Coordinates that still underflow after normalization are raised
/// to the smallest positive double so every word keeps non-zero mass.
pub fn sample_dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if concentration.is_empty() {
        return Err(Error::InvalidArgument("empty Dirichlet concentration".into()));
    }
    let mut logs = Vec::with_capacity(concentration.len());
    for &a in concentration {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("Dirichlet concentration {a} must be positive")));
        }
        logs.push(log_gamma_variate(a, rng));
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x = (*x / total).max(f64::MIN_POSITIVE);
    }
    Ok(out)
}

fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        // random() lies in [0, 1); 1 - u avoids ln(0).
        let u: f64 = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CdfState {
    /// Surrogate sufficient statistics of `phi`; only ever grows.
    pub nkv_hat: GlobalStats,
    pub phi: PhiMatrix,
}

impl CdfState {
    /// Empty counts and `phi` rows drawn from the symmetric prior `Dir(beta)`.
    pub fn new<R: Rng + ?Sized>(hyper: &Hyper, rng: &mut R) -> Result<Self> {
        let mut phi = PhiMatrix::uniform(hyper.topics, hyper.vocab);
        let prior = vec![hyper.beta; hyper.vocab];
        for k in 0..hyper.topics {
            phi.set_row(k, &sample_dirichlet(&prior, rng)?);
        }
        Ok(CdfState {
            nkv_hat: GlobalStats::new(hyper.topics, hyper.vocab),
            phi,
        })
    }

    /// Posterior mean of `phi` given the surrogate counts.
    pub fn phi_mean(&self, hyper: &Hyper) -> PhiMatrix {
        self.nkv_hat.phi_matrix(hyper)
    }

    fn resample_phi<R: Rng + ?Sized>(&mut self, hyper: &Hyper, rng: &mut R) -> Result<()> {
        let mut conc = vec![hyper.beta; hyper.vocab];
        for k in 0..hyper.topics {
            conc.iter_mut().for_each(|c| *c = hyper.beta);
            for (v, c) in self.nkv_hat.row(k) {
                conc[v] += c;
            }
            self.phi.set_row(k, &sample_dirichlet(&conc, rng)?);
        }
        Ok(())
    }
}

fn semi_collapsed_weights(phi: &PhiMatrix, doc: &DocState, v: usize, alpha: f64, weights: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (k, w) in weights.iter_mut().enumerate() {
        *w = (doc.ndk[k] as f64 + alpha) * phi.get(k, v);
        total += *w;
    }
    total
}

/// Process one document: progressive assignment against the current `phi`,
/// one resampling pass, accumulation into `nkv_hat`, then a fresh draw of
/// every `phi` row.
pub fn cdf_process_doc<R: Rng + ?Sized>(
    state: &mut CdfState,
    doc: &Document,
    hyper: &Hyper,
    rng: &mut R,
) -> Result<DocState> {
    let mut weights = vec![0.0; hyper.topics];
    let mut ds = DocState::new(hyper.topics);
    for &v in &doc.tokens {
        let total = semi_collapsed_weights(&state.phi, &ds, v, hyper.alpha, &mut weights);
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::NonFinite { word: v });
        }
        let k = draw_categorical(&weights, total, rng);
        ds.ndk[k] += 1;
        ds.nd += 1;
        ds.assignments.push(k);
    }
    for (i, &v) in doc.tokens.iter().enumerate() {
        let old = ds.assignments[i];
        ds.ndk[old] -= 1;
        let total = semi_collapsed_weights(&state.phi, &ds, v, hyper.alpha, &mut weights);
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::NonFinite { word: v });
        }
        let k = draw_categorical(&weights, total, rng);
        ds.ndk[k] += 1;
        ds.assignments[i] = k;
    }
    for (&k, &v) in ds.assignments.iter().zip(&doc.tokens) {
        state.nkv_hat.increment(k, v);
    }
    state.resample_phi(hyper, rng)?;
    Ok(ds)
}

/// Run CDF-LDA over a stream, one document at a time. After every mini-batch
/// the sink receives a report whose training perplexity is computed from
/// the posterior mean of `nkv_hat` and the batch's document states.
pub fn run_cdf_lda<I, R, F>(stream: I, hyper: &Hyper, rng: &mut R, mut sink: F) -> Result<CdfState>
where
    I: IntoIterator<Item = MiniBatch>,
    R: Rng + ?Sized,
    F: FnMut(&mut BatchReport, &CdfState) -> Result<()>,
{
    let mut state = CdfState::new(hyper, rng)?;
    for batch in stream {
        let start = Instant::now();
        let docs = batch
            .docs
            .iter()
            .map(|doc| cdf_process_doc(&mut state, doc, hyper, rng))
            .collect::<Result<Vec<_>>>()?;
        let tokens = batch.num_tokens();
        let docs = BatchState { docs };
        let train = if tokens > 0 {
            vec![train_perplexity(&state.nkv_hat, &docs, &batch.docs, hyper)?]
        } else {
            Vec::new()
        };
        let mut report = BatchReport {
            index: batch.index,
            iterations: 1,
            converged: false,
            train_perplexity: train,
            wall: start.elapsed(),
            docs: batch.docs.len(),
            tokens,
            theta: docs.docs.iter().map(|d| d.theta(hyper)).collect(),
            heldout_perplexity: None,
        };
        sink(&mut report, &state)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::rng_from_seed;

    #[test]
    fn dirichlet_degenerate_and_errors() {
        let mut rng = rng_from_seed(0);
        assert_eq!(sample_dirichlet(&[0.7], &mut rng).unwrap(), vec![1.0]);
        assert!(sample_dirichlet(&[1.0, 0.0], &mut rng).is_err());
        assert!(sample_dirichlet(&[1.0, -2.0], &mut rng).is_err());
        assert!(sample_dirichlet(&[], &mut rng).is_err());
    }

    #[test]
    fn dirichlet_tiny_concentration_is_a_distribution() {
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let x = sample_dirichlet(&[0.001; 50], &mut rng).unwrap();
            assert!(x.iter().all(|&p| p > 0.0));
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dirichlet_means() {
        let mut rng = rng_from_seed(2);
        let n = 50_000;
        let beta = 0.03;
        let v = 5;
        let sym = vec![0.5; 4];
        let mut conc = vec![beta; v];
        conc[0] += 2.0;
        let (mut m_sym, mut m_first) = (vec![0.0; 4], 0.0);
        for _ in 0..n {
            for (m, x) in m_sym.iter_mut().zip(sample_dirichlet(&sym, &mut rng).unwrap()) {
                *m += x / n as f64;
            }
            m_first += sample_dirichlet(&conc, &mut rng).unwrap()[0] / n as f64;
        }
        for m in m_sym {
            assert!((m - 0.25).abs() < 0.01, "{m}");
        }
        let expect = (2.0 + beta) / (2.0 + v as f64 * beta);
        assert!((m_first - expect).abs() < 0.01, "{m_first} vs {expect}");
    }

    #[test]
    fn single_topic_accumulates_word_counts() {
        let h = Hyper::new(0.1, 0.03, 1, 4).unwrap();
        let mut rng = rng_from_seed(3);
        let mut st = CdfState::new(&h, &mut rng).unwrap();
        let doc = Document::new(0, vec![0, 0, 2, 3, 3, 3]);
        let ds = cdf_process_doc(&mut st, &doc, &h, &mut rng).unwrap();
        assert_eq!(ds.assignments, vec![0; 6]);
        assert_eq!(st.nkv_hat.count(0, 0), 2.0);
        assert_eq!(st.nkv_hat.count(0, 1), 0.0);
        assert_eq!(st.nkv_hat.count(0, 3), 3.0);
    }

    #[test]
    fn mass_is_conserved_and_monotone() {
        let h = Hyper::new(0.1, 0.03, 3, 5).unwrap();
        let mut rng = rng_from_seed(4);
        let mut st = CdfState::new(&h, &mut rng).unwrap();
        let mut prev = st.nkv_hat.clone();
        for i in 0..20 {
            let doc = Document::new(i, (0..(i % 7)).map(|j| (i + j) % 5).collect());
            let before = st.nkv_hat.total_mass();
            let ds = cdf_process_doc(&mut st, &doc, &h, &mut rng).unwrap();
            assert_eq!(ds.nd as usize, doc.len());
            assert_eq!(st.nkv_hat.total_mass() - before, doc.len() as f64);
            for e in prev.entries() {
                assert!(st.nkv_hat.count(e.topic as usize, e.word as usize) >= e.value);
            }
            for k in 0..3 {
                assert!((st.phi.row(k).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            prev = st.nkv_hat.clone();
        }
    }

    #[test]
    fn uniform_phi_gives_uniform_first_conditional() {
        let h = Hyper::new(0.1, 0.03, 4, 3).unwrap();
        let phi = PhiMatrix::uniform(4, 3);
        let mut w = vec![0.0; 4];
        let total = semi_collapsed_weights(&phi, &DocState::new(4), 1, h.alpha, &mut w);
        assert!(w.iter().all(|&x| (x / total - 0.25).abs() < 1e-15));
    }

    #[test]
    fn empty_stream_and_determinism() {
        let h = Hyper::new(0.1, 0.03, 2, 3).unwrap();
        let st = run_cdf_lda(Vec::new(), &h, &mut rng_from_seed(0), |_, _| Ok(())).unwrap();
        assert_eq!(st.nkv_hat.nnz(), 0);

        let batches = || {
            vec![MiniBatch {
                index: 1,
                docs: vec![Document::new(0, vec![0, 1, 2, 2]), Document::new(1, vec![1, 1])],
            }]
        };
        let a = run_cdf_lda(batches(), &h, &mut rng_from_seed(8), |_, _| Ok(())).unwrap();
        let b = run_cdf_lda(batches(), &h, &mut rng_from_seed(8), |_, _| Ok(())).unwrap();
        assert_eq!(a, b);
    }
}
