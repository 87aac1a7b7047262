//! Forward sampling from the LDA generative process.
//!
//! ```text
//! phi_k ~ Dir(beta), theta_d ~ Dir(alpha), z ~ Mult(theta_d), w ~ Mult(phi_z)
//! ```
//!
//! An optional drift point redraws every `phi_k` after a given number of
//! mini-batches, producing a stream whose topics change mid-way.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::cdf::sample_dirichlet;
use crate::corpus::{Corpus, Document, Vocabulary};
use crate::sampler::{draw_categorical, rng_from_seed};
use crate::stats::PhiMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DocLength {
    Fixed(usize),
    Poisson(f64),
}

/// Redraw the topics once `after_batch` batches of `batch_size` documents
/// have been generated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drift {
    pub batch_size: usize,
    pub after_batch: usize,
}

impl Drift {
    pub fn first_drifted_doc(&self) -> usize {
        self.batch_size * self.after_batch
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub docs: usize,
    pub topics: usize,
    pub vocab: usize,
    pub doc_length: DocLength,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub drift: Option<Drift>,
}

impl GenSpec {
    pub fn new(docs: usize, topics: usize, vocab: usize, doc_length: DocLength) -> Self {
        GenSpec {
            docs,
            topics,
            vocab,
            doc_length,
            alpha: 0.1,
            beta: 0.03,
            seed: 0,
            drift: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.topics == 0 || self.vocab == 0 {
            return Err(Error::InvalidArgument("need at least one topic and one word".into()));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidArgument("alpha and beta must be positive".into()));
        }
        if let DocLength::Poisson(mean) = self.doc_length {
            if !(mean > 0.0 && mean.is_finite()) {
                return Err(Error::InvalidArgument(format!("Poisson mean {mean} must be positive")));
            }
        }
        if let Some(d) = self.drift {
            if d.batch_size == 0 {
                return Err(Error::InvalidArgument("drift batch size must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// A generated corpus together with the parameters that produced it.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub corpus: Corpus,
    /// One matrix per epoch: a single entry without drift, two with.
    pub phi: Vec<PhiMatrix>,
    pub theta: Vec<Vec<f64>>,
}

impl Synthetic {
    /// The topics in force when document `doc` was generated.
    pub fn phi_for_doc(&self, doc: usize, drift: Option<Drift>) -> &PhiMatrix {
        match drift {
            Some(d) if doc >= d.first_drifted_doc() && self.phi.len() > 1 => &self.phi[1],
            _ => &self.phi[0],
        }
    }
}

fn draw_topics<R: Rng + ?Sized>(spec: &GenSpec, rng: &mut R) -> Result<PhiMatrix> {
    let prior = vec![spec.beta; spec.vocab];
    let rows = (0..spec.topics)
        .map(|_| sample_dirichlet(&prior, rng))
        .collect::<Result<Vec<_>>>()?;
    PhiMatrix::from_rows(rows)
}

pub fn generate(spec: &GenSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut phis = vec![draw_topics(spec, &mut rng)?];
    let doc_prior = vec![spec.alpha; spec.topics];
    let poisson = match spec.doc_length {
        DocLength::Poisson(mean) => {
            Some(Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?)
        }
        DocLength::Fixed(_) => None,
    };

    let mut documents = Vec::with_capacity(spec.docs);
    let mut thetas = Vec::with_capacity(spec.docs);
    for d in 0..spec.docs {
        if spec.drift.is_some_and(|dr| d == dr.first_drifted_doc()) {
            phis.push(draw_topics(spec, &mut rng)?);
        }
        let phi = phis.last().expect("at least one epoch");
        let theta = sample_dirichlet(&doc_prior, &mut rng)?;
        let len = match (spec.doc_length, &poisson) {
            (DocLength::Fixed(n), _) => n,
            (_, Some(p)) => p.sample(&mut rng) as usize,
            _ => unreachable!(),
        };
        let tokens = (0..len)
            .map(|_| {
                let k = draw_categorical(&theta, 1.0, &mut rng);
                draw_categorical(phi.row(k), 1.0, &mut rng)
            })
            .collect();
        documents.push(Document::new(d, tokens));
        thetas.push(theta);
    }
    let vocab = Vocabulary::new((0..spec.vocab).map(|v| format!("word{v}")).collect())?;
    Ok(Synthetic {
        corpus: Corpus::new(documents, vocab)?,
        phi: phis,
        theta: thetas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word_freq(docs: &[Document], v: usize) -> Vec<f64> {
        let mut f = vec![0.0; v];
        let n: usize = docs.iter().map(Document::len).sum();
        for d in docs {
            for &w in &d.tokens {
                f[w] += 1.0 / n as f64;
            }
        }
        f
    }

    #[test]
    fn single_topic_frequencies_converge() {
        let mut spec = GenSpec::new(1000, 1, 20, DocLength::Fixed(100));
        spec.beta = 0.5;
        spec.seed = 3;
        let s = generate(&spec).unwrap();
        assert_eq!(s.corpus.num_tokens(), 100_000);
        let f = word_freq(&s.corpus.documents, 20);
        for (v, fv) in f.iter().enumerate() {
            assert!((fv - s.phi[0].get(0, v)).abs() < 0.02, "word {v}");
        }
    }

    #[test]
    fn deterministic_and_in_range() {
        let mut spec = GenSpec::new(50, 4, 30, DocLength::Poisson(20.0));
        spec.seed = 11;
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert!(a.corpus.documents.iter().flat_map(|d| &d.tokens).all(|&w| w < 30));
        assert_eq!(a.theta.len(), 50);
        assert_eq!(a.phi.len(), 1);
    }

    #[test]
    fn drift_changes_word_marginals() {
        for seed in 0..5 {
            let mut spec = GenSpec::new(400, 5, 100, DocLength::Fixed(100));
            spec.seed = seed;
            spec.drift = Some(Drift {
                batch_size: 100,
                after_batch: 2,
            });
            let s = generate(&spec).unwrap();
            assert_eq!(s.phi.len(), 2);
            let pre = word_freq(&s.corpus.documents[..200], 100);
            let post = word_freq(&s.corpus.documents[200..], 100);
            let tv: f64 = 0.5 * pre.iter().zip(&post).map(|(a, b)| (a - b).abs()).sum::<f64>();
            assert!(tv > 0.1, "seed {seed}: tv {tv}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate(&GenSpec::new(1, 0, 3, DocLength::Fixed(1))).is_err());
        assert!(generate(&GenSpec::new(1, 2, 3, DocLength::Poisson(0.0))).is_err());
    }
}
