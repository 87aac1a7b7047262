//! Score a model on held-out documents with fold-in: half of each test
//! document estimates its topic mixture, the other half is scored.

use std::io;

use streamlda::corpus::split_train_test;
use streamlda::eval::{corpus_perplexity, write_eval_csv, EvalConfig};
use streamlda::sampler::{rng_from_seed, run_cgs};
use streamlda::stats::{Hyper, PhiMatrix};
use streamlda::synth::{generate, DocLength, GenSpec};

fn main() -> streamlda::Result<()> {
    let mut spec = GenSpec::new(300, 4, 50, DocLength::Poisson(60.0));
    spec.seed = 5;
    let s = generate(&spec)?;
    let (train, test) = split_train_test(&s.corpus, 0.05, 5)?;
    let hyper = Hyper::new(0.1, 0.03, 4, 50)?;
    let eval = EvalConfig::default();

    let uniform = corpus_perplexity(&PhiMatrix::uniform(4, 50), &test.documents, &hyper, &eval)?;
    let (stats, _) = run_cgs(&train, 100, &hyper, &mut rng_from_seed(5))?;
    let learned = corpus_perplexity(&stats.phi_matrix(&hyper), &test.documents, &hyper, &eval)?;
    let truth = corpus_perplexity(&s.phi[0], &test.documents, &hyper, &eval)?;
    println!(
        "uniform {:.2}, learned {:.2}, true topics {:.2} over {} held-out tokens",
        uniform.perplexity, learned.perplexity, truth.perplexity, learned.heldout_tokens
    );
    write_eval_csv(&learned, io::stdout().lock())
}
