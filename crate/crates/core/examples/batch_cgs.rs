//! Batch collapsed Gibbs sampling on a synthetic corpus, with the learned
//! topics matched against the true ones.

use streamlda::corpus::split_train_test;
use streamlda::eval::{corpus_perplexity, EvalConfig};
use streamlda::sampler::{rng_from_seed, run_cgs};
use streamlda::stats::Hyper;
use streamlda::streaming::train_perplexity;
use streamlda::synth::{generate, DocLength, GenSpec};

fn main() -> streamlda::Result<()> {
    let mut spec = GenSpec::new(500, 5, 100, DocLength::Poisson(100.0));
    spec.seed = 3;
    let s = generate(&spec)?;
    let (train, test) = split_train_test(&s.corpus, 0.2, 3)?;
    let hyper = Hyper::new(0.1, 0.03, 5, 100)?;

    let eval = EvalConfig::default();
    for iters in [1, 10, 50, 200] {
        let (stats, state) = run_cgs(&train, iters, &hyper, &mut rng_from_seed(0))?;
        let ppl = corpus_perplexity(&stats.phi_matrix(&hyper), &test.documents, &hyper, &eval)?;
        println!(
            "{iters:>4} iterations: train perplexity {:.2}, held-out {:.2}",
            train_perplexity(&stats, &state, &train.documents, &hyper)?,
            ppl.perplexity
        );
    }
    let truth = corpus_perplexity(&s.phi[0], &test.documents, &hyper, &eval)?;
    println!("true topics: held-out {:.2}", truth.perplexity);

    // Each learned topic against its closest true topic (total variation).
    let (stats, _) = run_cgs(&train, 200, &hyper, &mut rng_from_seed(0))?;
    let phi = stats.phi_matrix(&hyper);
    for k in 0..5 {
        let (best, tv) = (0..5)
            .map(|j| {
                let tv: f64 = phi.row(k).iter().zip(s.phi[0].row(j)).map(|(a, b)| (a - b).abs()).sum();
                (j, tv / 2.0)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        println!("learned topic {k} ~ true topic {best} (TV {tv:.3})");
    }
    Ok(())
}
