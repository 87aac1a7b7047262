//! A stream whose topics are redrawn half way through. Decaying the global
//! counts after each batch lets the model forget the old topics.

use streamlda::corpus::{batches, split_train_test, Corpus};
use streamlda::eval::{corpus_perplexity, EvalConfig};
use streamlda::sampler::rng_from_seed;
use streamlda::stats::{GlobalStats, Hyper};
use streamlda::streaming::{run_sgs_from, StreamConfig};
use streamlda::synth::{generate, DocLength, Drift, GenSpec};

fn main() -> streamlda::Result<()> {
    let mut spec = GenSpec::new(2000, 5, 100, DocLength::Poisson(100.0));
    spec.seed = 2;
    spec.drift = Some(Drift {
        batch_size: 100,
        after_batch: 10,
    });
    let corpus = generate(&spec)?.corpus;
    let hyper = Hyper::new(0.1, 0.03, 5, 100)?;

    println!("batch  lambda=1.0  lambda=0.7");
    let mut rows = vec![Vec::new(); 20];
    for lambda in [1.0, 0.7] {
        let config = StreamConfig {
            lambda,
            ..StreamConfig::new(hyper, 80)
        };
        let mut stats = GlobalStats::new(5, 100);
        let mut rng = rng_from_seed(2);
        for (t, chunk) in corpus.documents.chunks(100).enumerate() {
            // Train on 80 documents of the arriving batch, score the other 20.
            let batch = Corpus::new(chunk.to_vec(), corpus.vocab.clone())?;
            let (train, test) = split_train_test(&batch, 0.2, t as u64)?;
            stats = run_sgs_from(stats, batches(train.documents, 80)?, &config, &mut rng, |_, _| Ok(()))?;
            let ppl = corpus_perplexity(&stats.phi_matrix(&hyper), &test.documents, &hyper, &EvalConfig::default())?;
            rows[t].push(ppl.perplexity);
        }
    }
    for (t, r) in rows.iter().enumerate() {
        let mark = if t == 10 { "  <- topics redrawn" } else { "" };
        println!("{:>5}  {:>10.2}  {:>10.2}{mark}", t + 1, r[0], r[1]);
    }
    Ok(())
}
