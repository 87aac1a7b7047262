//! Distributed streaming Gibbs sampling over loopback TCP: one parameter
//! server, four workers with disjoint shards of the stream.

use std::thread;

use streamlda::corpus::{batches, split_train_test};
use streamlda::dsgs::{serve_with, shard_documents, wait_for_model, worker_run, ParameterClient, ServerOptions};
use streamlda::eval::{corpus_perplexity, EvalConfig};
use streamlda::sampler::rng_from_seed;
use streamlda::stats::Hyper;
use streamlda::streaming::StreamConfig;
use streamlda::synth::{generate, DocLength, GenSpec};

fn main() -> streamlda::Result<()> {
    env_logger::init();
    let mut spec = GenSpec::new(2000, 5, 100, DocLength::Poisson(100.0));
    spec.seed = 6;
    let corpus = generate(&spec)?.corpus;
    let (train, test) = split_train_test(&corpus, 0.2, 6)?;
    let hyper = Hyper::new(0.1, 0.03, 5, 100)?;
    let config = StreamConfig::new(hyper, 100);

    let server = serve_with("127.0.0.1:0", &hyper, 1.0, ServerOptions { record_pushes: true })?;
    let addr = server.local_addr().to_string();
    println!("server on {addr}");

    let workers: Vec<_> = shard_documents(&train.documents, 4)
        .into_iter()
        .enumerate()
        .map(|(i, shard)| {
            let (addr, config) = (addr.clone(), config.clone());
            thread::spawn(move || -> streamlda::Result<()> {
                let mut client = ParameterClient::new(addr);
                if i > 0 {
                    // Let worker 0 establish the topic labeling first.
                    wait_for_model(&mut client, std::time::Duration::from_millis(5), std::time::Duration::from_secs(60))?;
                }
                let summary = worker_run(&mut client, batches(shard, 100)?, &config, &mut rng_from_seed(i as u64), |r| {
                    println!("worker {i} batch {}: pushed {} cells, mass {}", r.index, r.pushed_entries, r.pushed_mass);
                    Ok(())
                })?;
                println!("worker {i} done: {summary:?}");
                Ok(())
            })
        })
        .collect();
    for w in workers {
        w.join().expect("worker panicked")?;
    }

    let state = server.shutdown();
    let ppl = corpus_perplexity(&state.stats.phi_matrix(&hyper), &test.documents, &hyper, &EvalConfig::default())?;
    println!("{} pushes merged; held-out perplexity {:.2}", state.merges, ppl.perplexity);
    Ok(())
}
