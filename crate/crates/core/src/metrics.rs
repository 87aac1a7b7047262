//! Per-batch metrics as CSV and line-delimited JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::streaming::BatchReport;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub t: usize,
    pub iterations: usize,
    pub train_perplexity: f64,
    pub heldout_perplexity: Option<f64>,
    pub wall_ms: f64,
    pub tokens_per_sec: f64,
}

impl From<&BatchReport> for MetricsRecord {
    fn from(r: &BatchReport) -> Self {
        MetricsRecord {
            t: r.index,
            iterations: r.iterations,
            train_perplexity: r.final_train_perplexity(),
            heldout_perplexity: r.heldout_perplexity,
            wall_ms: r.wall.as_secs_f64() * 1e3,
            tokens_per_sec: r.tokens_per_sec(),
        }
    }
}

/// Writes each record to a CSV sink and a JSON-lines sink.
pub struct MetricsWriter<C: Write, J: Write> {
    csv: csv::Writer<C>,
    jsonl: J,
    rows: usize,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

impl<C: Write, J: Write> MetricsWriter<C, J> {
    pub fn new(csv: C, jsonl: J) -> Self {
        MetricsWriter {
            csv: csv::Writer::from_writer(csv),
            jsonl,
            rows: 0,
        }
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        self.csv.serialize(record).map_err(csv_err)?;
        serde_json::to_writer(&mut self.jsonl, record).map_err(|e| Error::Io(e.into()))?;
        self.jsonl.write_all(b"\n")?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn flush(&mut self) -> Result<()> {
        self.csv.flush()?;
        self.jsonl.flush()?;
        Ok(())
    }
}

impl MetricsWriter<BufWriter<File>, BufWriter<File>> {
    /// `metrics.csv` and `metrics.jsonl` inside `dir`.
    pub fn create_in(dir: &Path) -> Result<Self> {
        let csv = BufWriter::new(File::create(dir.join("metrics.csv"))?);
        let jsonl = BufWriter::new(File::create(dir.join("metrics.jsonl"))?);
        Ok(Self::new(csv, jsonl))
    }
}
