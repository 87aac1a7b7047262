//! Streaming Gibbs sampling: one pass over mini-batches, with per-batch
//! convergence and held-out perplexity as the stream advances.

use streamlda::corpus::{minibatch_stream, split_train_test};
use streamlda::eval::{corpus_perplexity, EvalConfig};
use streamlda::sampler::rng_from_seed;
use streamlda::stats::Hyper;
use streamlda::streaming::{run_sgs, StreamConfig};
use streamlda::synth::{generate, DocLength, GenSpec};

fn main() -> streamlda::Result<()> {
    let mut spec = GenSpec::new(2000, 5, 100, DocLength::Poisson(100.0));
    spec.seed = 1;
    let corpus = generate(&spec)?.corpus;
    let (train, test) = split_train_test(&corpus, 0.2, 1)?;
    let hyper = Hyper::new(0.1, 0.03, 5, 100)?;
    let config = StreamConfig::new(hyper, 100);
    let eval = EvalConfig::default();

    let stats = run_sgs(minibatch_stream(&train, 100)?, &config, &mut rng_from_seed(1), |report, stats| {
        let heldout = corpus_perplexity(&stats.phi_matrix(&hyper), &test.documents, &hyper, &eval)?;
        report.heldout_perplexity = Some(heldout.perplexity);
        println!(
            "batch {:>2}: {:>3} iterations{}, train {:.2}, held-out {:.2}, {:.0} tokens/s",
            report.index,
            report.iterations,
            if report.converged { " (converged)" } else { "" },
            report.final_train_perplexity(),
            heldout.perplexity,
            report.tokens_per_sec()
        );
        Ok(())
    })?;
    println!("{} non-zero cells, {} tokens of mass", stats.nnz(), stats.total_mass());
    Ok(())
}
