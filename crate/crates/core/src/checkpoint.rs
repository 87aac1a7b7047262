//! Plain-text model checkpoints.
//!
//! The first line holds `K V alpha beta`; every following line is one stored
//! cell `topic word count` with 0-based indices, topic-major and
//! word-ascending. Counts are written in shortest round-trip form, so a
//! checkpoint reloads to bit-identical cells.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::stats::{GlobalStats, Hyper, SparseEntry};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub hyper: Hyper,
    pub stats: GlobalStats,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: "checkpoint".into(),
        line,
        message: message.into(),
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, hyper: &Hyper, stats: &GlobalStats) -> Result<()> {
    writeln!(w, "{} {} {} {}", hyper.topics, hyper.vocab, hyper.alpha, hyper.beta)?;
    for e in stats.entries() {
        writeln!(w, "{} {} {}", e.topic, e.word, e.value)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Checkpoint> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty checkpoint"))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(parse_err(1, format!("expected \"K V alpha beta\", got {header:?}")));
    }
    let bad = |what: &str| parse_err(1, format!("malformed {what} in header"));
    let topics: usize = fields[0].parse().map_err(|_| bad("K"))?;
    let vocab: usize = fields[1].parse().map_err(|_| bad("V"))?;
    let alpha: f64 = fields[2].parse().map_err(|_| bad("alpha"))?;
    let beta: f64 = fields[3].parse().map_err(|_| bad("beta"))?;
    let hyper = Hyper::new(alpha, beta, topics, vocab)?;

    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 2;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(n, format!("expected \"topic word count\", got {line:?}")));
        }
        let topic: usize = f[0].parse().map_err(|_| parse_err(n, "malformed topic"))?;
        let word: usize = f[1].parse().map_err(|_| parse_err(n, "malformed word"))?;
        let value: f64 = f[2].parse().map_err(|_| parse_err(n, "malformed count"))?;
        entries.push(SparseEntry::new(topic, word, value));
    }
    let stats = GlobalStats::from_entries(topics, vocab, &entries)?;
    Ok(Checkpoint { hyper, stats })
}

pub fn save(path: &Path, hyper: &Hyper, stats: &GlobalStats) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), hyper, stats)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_checkpoint(BufReader::new(file))
}
