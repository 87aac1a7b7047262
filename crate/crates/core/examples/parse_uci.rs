//! Load a UCI bag-of-words corpus, split it and stream it in mini-batches.
//!
//! ```text
//! cargo run --example parse_uci -- docword.txt [vocab.txt]
//! ```
//!
//! Without arguments a tiny inline corpus is parsed.

use std::path::Path;

use streamlda::corpus::{load_uci, minibatch_stream, parse_uci, split_tokens_half, split_train_test};

const DOCWORD: &str = "3\n4\n5\n1 1 2\n1 3 1\n2 2 3\n3 4 1\n3 1 1\n";
const VOCAB: &str = "apple\nbanana\ncherry\ndate\n";

fn main() -> streamlda::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let corpus = match args.as_slice() {
        [] => parse_uci(DOCWORD.as_bytes(), VOCAB.as_bytes())?,
        [dw] => load_uci(Path::new(dw), None)?,
        [dw, vocab, ..] => load_uci(Path::new(dw), Some(Path::new(vocab)))?,
    };
    println!(
        "{} documents, {} tokens, vocabulary {}",
        corpus.num_docs(),
        corpus.num_tokens(),
        corpus.vocab_size()
    );
    for doc in corpus.documents.iter().take(3) {
        let words: Vec<&str> = doc.tokens.iter().map(|&w| corpus.vocab.word(w).unwrap_or("?")).collect();
        let (observed, heldout) = split_tokens_half(doc);
        println!(
            "doc {}: {} ({} observed / {} held out)",
            doc.id,
            words.join(" "),
            observed.len(),
            heldout.len()
        );
    }

    if corpus.num_docs() >= 2 {
        let (train, test) = split_train_test(&corpus, 0.2, 0)?;
        println!("train {} docs, test {} docs", train.num_docs(), test.num_docs());
        let size = (train.num_docs() / 4).max(1);
        for batch in minibatch_stream(&train, size)? {
            println!("batch {}: {} docs, {} tokens", batch.index, batch.docs.len(), batch.num_tokens());
        }
    }
    Ok(())
}
