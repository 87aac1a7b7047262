//! Bag-of-words corpora in the UCI format, train/test splits and mini-batch
//! streams.
//!
//! The UCI `docword` file stores per-document word counts, not token
//! positions. A document is expanded into a token sequence in ascending word
//! index order, each word repeated `count` times. Word and document IDs are
//! 1-based on disk and 0-based in memory.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
}

impl Vocabulary {
    pub fn new(words: Vec<String>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(words.len());
        for (idx, word) in words.iter().enumerate() {
            if let Some(first) = seen.insert(word.as_str(), idx) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate vocabulary word {word:?} at lines {} and {}",
                    first + 1,
                    idx + 1
                )));
            }
        }
        Ok(Vocabulary { words })
    }

    /// Placeholder vocabulary `w1..wV`, used when only a docword file is at hand.
    pub fn numbered(size: usize) -> Self {
        Vocabulary {
            words: (1..=size).map(|i| format!("w{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    /// 0-based position of the document in its source file.
    pub id: usize,
    pub tokens: Vec<usize>,
}

impl Document {
    pub fn new(id: usize, tokens: Vec<usize>) -> Self {
        Document { id, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub vocab: Vocabulary,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, vocab: Vocabulary) -> Result<Self> {
        let v = vocab.len();
        for doc in &documents {
            if let Some(&w) = doc.tokens.iter().find(|&&w| w >= v) {
                return Err(Error::InvalidArgument(format!(
                    "document {} has word index {w} outside vocabulary of size {v}",
                    doc.id
                )));
            }
        }
        Ok(Corpus { documents, vocab })
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }
}

/// A contiguous group of documents arriving together. `index` is 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiniBatch {
    pub index: usize,
    pub docs: Vec<Document>,
}

impl MiniBatch {
    pub fn num_tokens(&self) -> usize {
        self.docs.iter().map(Document::len).sum()
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    name: &'static str,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R, name: &'static str) -> Self {
        Lines {
            inner: reader.lines(),
            name,
            line: 0,
        }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.name.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            None => Ok(None),
            Some(line) => {
                self.line += 1;
                Ok(Some(line?))
            }
        }
    }

    fn header_value(&mut self, what: &str) -> Result<usize> {
        let line = self
            .next_line()?
            .ok_or_else(|| self.error(format!("missing header line for {what}")))?;
        line.trim()
            .parse()
            .map_err(|_| self.error(format!("malformed header: expected {what}, got {line:?}")))
    }
}

/// Parse a UCI docword stream and its vocabulary.
pub fn parse_uci<D: BufRead, W: BufRead>(docword: D, vocab: W) -> Result<Corpus> {
    let (num_vocab, documents) = parse_docword(docword)?;

    let mut lines = Lines::new(vocab, "vocab");
    let mut words = Vec::with_capacity(num_vocab);
    while let Some(line) = lines.next_line()? {
        words.push(line.trim_end_matches('\r').to_string());
    }
    // A single trailing blank line is an artifact of the final newline on some files.
    if words.len() == num_vocab + 1 && words.last().is_some_and(|w| w.is_empty()) {
        words.pop();
    }
    if words.len() != num_vocab {
        return Err(Error::Parse {
            source_name: "vocab".into(),
            line: words.len(),
            message: format!("vocabulary has {} lines, header says V = {num_vocab}", words.len()),
        });
    }
    Corpus::new(documents, Vocabulary::new(words)?)
}

/// Parse only the docword stream, returning `V` and the documents.
pub fn parse_docword<R: BufRead>(reader: R) -> Result<(usize, Vec<Document>)> {
    let mut lines = Lines::new(reader, "docword");
    let num_docs = lines.header_value("D")?;
    let num_vocab = lines.header_value("V")?;
    let nnz = lines.header_value("NNZ")?;

    let mut per_doc: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_docs];
    let mut seen = 0;
    while seen < nnz {
        let line = lines
            .next_line()?
            .ok_or_else(|| lines.error(format!("expected {nnz} triples, found {seen}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(lines.error(format!("expected \"docID wordID count\", got {line:?}")));
        }
        let parse = |s: &str, what: &str| -> Result<i64> {
            s.parse::<i64>()
                .map_err(|_| lines.error(format!("malformed {what} {s:?}")))
        };
        let doc = parse(fields[0], "docID")?;
        let word = parse(fields[1], "wordID")?;
        let count = parse(fields[2], "count")?;
        if doc < 1 || doc as usize > num_docs {
            return Err(lines.error(format!("document ID {doc} out of range [1, {num_docs}]")));
        }
        if word < 1 || word as usize > num_vocab {
            return Err(lines.error(format!("word ID {word} out of range [1, {num_vocab}]")));
        }
        if count < 1 {
            return Err(lines.error(format!("count {count} must be at least 1")));
        }
        per_doc[doc as usize - 1].push((word as usize - 1, count as usize));
        seen += 1;
    }
    while let Some(line) = lines.next_line()? {
        if !line.trim().is_empty() {
            return Err(lines.error(format!("more than NNZ = {nnz} triples")));
        }
    }

    let documents = per_doc
        .into_iter()
        .enumerate()
        .map(|(id, mut records)| {
            records.sort_unstable_by_key(|&(w, _)| w);
            let tokens = records
                .into_iter()
                .flat_map(|(w, c)| std::iter::repeat_n(w, c))
                .collect();
            Document::new(id, tokens)
        })
        .collect();
    Ok((num_vocab, documents))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Load a corpus from a docword file and an optional vocabulary file.
pub fn load_uci(docword: &Path, vocab: Option<&Path>) -> Result<Corpus> {
    match vocab {
        Some(vocab) => parse_uci(open(docword)?, open(vocab)?),
        None => {
            let (v, documents) = parse_docword(open(docword)?)?;
            Corpus::new(documents, Vocabulary::numbered(v))
        }
    }
}

/// Write a corpus back out in UCI format.
pub fn write_uci<D: Write, W: Write>(corpus: &Corpus, mut docword: D, mut vocab: W) -> Result<()> {
    let mut triples = Vec::new();
    for (d, doc) in corpus.documents.iter().enumerate() {
        let mut counts: Vec<(usize, usize)> = Vec::new();
        let mut sorted = doc.tokens.clone();
        sorted.sort_unstable();
        for w in sorted {
            match counts.last_mut() {
                Some((last, c)) if *last == w => *c += 1,
                _ => counts.push((w, 1)),
            }
        }
        triples.extend(counts.into_iter().map(|(w, c)| (d + 1, w + 1, c)));
    }
    writeln!(docword, "{}", corpus.num_docs())?;
    writeln!(docword, "{}", corpus.vocab_size())?;
    writeln!(docword, "{}", triples.len())?;
    for (d, w, c) in triples {
        writeln!(docword, "{d} {w} {c}")?;
    }
    for word in corpus.vocab.words() {
        writeln!(vocab, "{word}")?;
    }
    docword.flush()?;
    vocab.flush()?;
    Ok(())
}

/// Document-level split by seeded shuffle. Returns `(train, test)`; both keep
/// the original document order and ids.
pub fn split_train_test(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n = corpus.num_docs();
    // The small slack keeps e.g. 10 * 0.7 from rounding up to 8.
    let num_test = ((n as f64 * test_fraction) - 1e-9).ceil().max(0.0) as usize;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; n];
    for &i in &order[..num_test] {
        is_test[i] = true;
    }

    let (test, train): (Vec<_>, Vec<_>) = corpus
        .documents
        .iter()
        .cloned()
        .zip(is_test)
        .partition(|(_, t)| *t);
    let strip = |docs: Vec<(Document, bool)>| docs.into_iter().map(|(d, _)| d).collect();
    Ok((
        Corpus {
            documents: strip(train),
            vocab: corpus.vocab.clone(),
        },
        Corpus {
            documents: strip(test),
            vocab: corpus.vocab.clone(),
        },
    ))
}

/// Shuffle document order with a seed. Streaming order is file order unless
/// this is applied first.
pub fn shuffle_documents(corpus: &mut Corpus, seed: u64) {
    corpus
        .documents
        .shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
}

/// Lazily chunks a document sequence into mini-batches.
pub struct MiniBatchStream<I> {
    docs: I,
    batch_size: usize,
    next_index: usize,
}

impl<I: Iterator<Item = Document>> Iterator for MiniBatchStream<I> {
    type Item = MiniBatch;

    fn next(&mut self) -> Option<MiniBatch> {
        let docs: Vec<Document> = self.docs.by_ref().take(self.batch_size).collect();
        if docs.is_empty() {
            return None;
        }
        let index = self.next_index;
        self.next_index += 1;
        Some(MiniBatch { index, docs })
    }
}

pub fn batches<I>(docs: I, batch_size: usize) -> Result<MiniBatchStream<I::IntoIter>>
where
    I: IntoIterator<Item = Document>,
{
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    Ok(MiniBatchStream {
        docs: docs.into_iter(),
        batch_size,
        next_index: 1,
    })
}

/// Mini-batches over a corpus in document order.
pub fn minibatch_stream(
    corpus: &Corpus,
    batch_size: usize,
) -> Result<MiniBatchStream<std::iter::Cloned<std::slice::Iter<'_, Document>>>> {
    batches(corpus.documents.iter().cloned(), batch_size)
}

/// Split a document's tokens into an observed first half (rounded up) and a
/// held-out remainder.
pub fn split_tokens_half(doc: &Document) -> (&[usize], &[usize]) {
    doc.tokens.split_at(doc.tokens.len().div_ceil(2))
}
