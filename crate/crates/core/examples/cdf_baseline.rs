//! CDF-LDA against streaming Gibbs sampling on the same stream.

use streamlda::cdf::run_cdf_lda;
use streamlda::corpus::{minibatch_stream, split_train_test};
use streamlda::eval::{corpus_perplexity, EvalConfig};
use streamlda::sampler::rng_from_seed;
use streamlda::stats::Hyper;
use streamlda::streaming::{run_sgs, StreamConfig};
use streamlda::synth::{generate, DocLength, GenSpec};

fn main() -> streamlda::Result<()> {
    let mut spec = GenSpec::new(2000, 5, 100, DocLength::Poisson(100.0));
    spec.seed = 4;
    let corpus = generate(&spec)?.corpus;
    let (train, test) = split_train_test(&corpus, 0.2, 4)?;
    let hyper = Hyper::new(0.1, 0.03, 5, 100)?;
    let eval = EvalConfig::default();

    let cdf = run_cdf_lda(minibatch_stream(&train, 100)?, &hyper, &mut rng_from_seed(4), |r, state| {
        let p = corpus_perplexity(&state.phi_mean(&hyper), &test.documents, &hyper, &eval)?;
        println!("CDF batch {:>2}: held-out {:.2}", r.index, p.perplexity);
        Ok(())
    })?;
    let sgs = run_sgs(minibatch_stream(&train, 100)?, &StreamConfig::new(hyper, 100), &mut rng_from_seed(4), |_, _| Ok(()))?;

    let score = |phi| corpus_perplexity(&phi, &test.documents, &hyper, &eval).map(|r| r.perplexity);
    println!("final held-out perplexity: CDF-LDA {:.2}, SGS {:.2}", score(cdf.phi_mean(&hyper))?, score(sgs.phi_matrix(&hyper))?);
    Ok(())
}
