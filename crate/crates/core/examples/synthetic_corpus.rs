//! Draw a corpus from the LDA generative process and write it as UCI files.
//!
//! ```text
//! cargo run --example synthetic_corpus -- [OUT_DIR]
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use streamlda::corpus::write_uci;
use streamlda::synth::{generate, DocLength, Drift, GenSpec};

fn main() -> streamlda::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic".into()));
    let mut spec = GenSpec::new(1000, 5, 100, DocLength::Poisson(80.0));
    spec.seed = 1;
    spec.drift = Some(Drift {
        batch_size: 100,
        after_batch: 5,
    });
    let s = generate(&spec)?;

    println!(
        "{} documents, {} tokens, vocabulary {}",
        s.corpus.num_docs(),
        s.corpus.num_tokens(),
        s.corpus.vocab_size()
    );
    for (epoch, phi) in s.phi.iter().enumerate() {
        println!("epoch {epoch}:");
        for k in 0..phi.topics() {
            let mut top: Vec<usize> = (0..phi.vocab()).collect();
            top.sort_by(|&a, &b| phi.get(k, b).total_cmp(&phi.get(k, a)));
            let words: Vec<String> = top[..6].iter().map(|&v| s.corpus.vocab.words()[v].clone()).collect();
            println!("  topic {k}: {}", words.join(" "));
        }
    }

    fs::create_dir_all(&out)?;
    write_uci(
        &s.corpus,
        BufWriter::new(File::create(out.join("docword.txt"))?),
        BufWriter::new(File::create(out.join("vocab.txt"))?),
    )?;
    println!("wrote {}/docword.txt and vocab.txt", out.display());
    Ok(())
}
