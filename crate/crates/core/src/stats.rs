//! Sufficient statistics of collapsed LDA.
//!
//! [`GlobalStats`] holds the topic-word counts `N_kv` as one sparse row per
//! topic together with the dense topic totals `N_k`. Counts are real-valued
//! because decay scales them by a factor in (0, 1]; as long as no decay is
//! applied they remain exact integers.
//!
//! Rows are ordered maps so that every traversal (decay, delta extraction,
//! serialization) visits cells in the same topic-major, word-ascending order.
//! Floating point results are therefore reproducible bit for bit.

use std::collections::BTreeMap;

use crate::{Error, Result};

/// Entries smaller than this are dropped, and their mass is removed from the
/// topic total.
pub const PRUNE_THRESHOLD: f64 = 1e-10;

/// Slack allowed when merged deltas push a cell slightly below zero.
pub const NEGATIVE_SLACK: f64 = 1e-9;

/// Symmetric Dirichlet hyperparameters and model dimensions.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Hyper {
    /// Document-topic prior.
    pub alpha: f64,
    /// Topic-word prior.
    pub beta: f64,
    pub topics: usize,
    pub vocab: usize,
}

impl Hyper {
    pub const DEFAULT_ALPHA: f64 = 0.1;
    pub const DEFAULT_BETA: f64 = 0.03;
    pub const DEFAULT_TOPICS: usize = 50;

    pub fn new(alpha: f64, beta: f64, topics: usize, vocab: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if topics == 0 || vocab == 0 {
            return Err(Error::InvalidArgument(format!(
                "need at least one topic and one word, got K = {topics}, V = {vocab}"
            )));
        }
        Ok(Hyper {
            alpha,
            beta,
            topics,
            vocab,
        })
    }

    /// alpha = 0.1, beta = 0.03, K = 50.
    pub fn with_defaults(vocab: usize) -> Result<Self> {
        Hyper::new(Self::DEFAULT_ALPHA, Self::DEFAULT_BETA, Self::DEFAULT_TOPICS, vocab)
    }

    pub(crate) fn vocab_beta(&self) -> f64 {
        self.vocab as f64 * self.beta
    }
}

/// One `(topic, word, value)` cell. Used both for deltas and for full snapshots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseEntry {
    pub topic: u32,
    pub word: u32,
    pub value: f64,
}

impl SparseEntry {
    pub fn new(topic: usize, word: usize, value: f64) -> Self {
        SparseEntry {
            topic: topic as u32,
            word: word as u32,
            value,
        }
    }
}

/// Signed cell-wise difference between two [`GlobalStats`], at most one
/// entry per cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseDelta {
    pub entries: Vec<SparseEntry>,
}

impl SparseDelta {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Sum of all signed entries.
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.value).sum()
    }
}

/// Per-document topic assignments and counts.
#[derive(Clone, Debug, PartialEq)]
pub struct DocState {
    pub assignments: Vec<usize>,
    pub ndk: Vec<u32>,
    pub nd: u32,
}

impl DocState {
    pub fn new(topics: usize) -> Self {
        DocState {
            assignments: Vec::new(),
            ndk: vec![0; topics],
            nd: 0,
        }
    }

    /// Rebuild counts from a complete assignment vector.
    pub fn from_assignments(topics: usize, assignments: Vec<usize>) -> Result<Self> {
        let mut ndk = vec![0u32; topics];
        for &k in &assignments {
            *ndk.get_mut(k)
                .ok_or_else(|| Error::InvalidArgument(format!("topic {k} out of range")))? += 1;
        }
        let nd = assignments.len() as u32;
        Ok(DocState { assignments, ndk, nd })
    }

    /// Posterior mean `(N_dk + alpha) / (N_d + K alpha)` of one topic.
    pub fn theta_mean(&self, hyper: &Hyper, k: usize) -> f64 {
        (self.ndk[k] as f64 + hyper.alpha) / (self.nd as f64 + hyper.topics as f64 * hyper.alpha)
    }

    pub fn theta(&self, hyper: &Hyper) -> Vec<f64> {
        (0..hyper.topics).map(|k| self.theta_mean(hyper, k)).collect()
    }
}

/// Free-function form of [`DocState::theta_mean`].
pub fn theta_mean(doc: &DocState, hyper: &Hyper, k: usize) -> f64 {
    doc.theta_mean(hyper, k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalStats {
    rows: Vec<BTreeMap<usize, f64>>,
    totals: Vec<f64>,
    vocab: usize,
    prune_threshold: f64,
}

impl GlobalStats {
    pub fn new(topics: usize, vocab: usize) -> Self {
        GlobalStats {
            rows: vec![BTreeMap::new(); topics],
            totals: vec![0.0; topics],
            vocab,
            prune_threshold: PRUNE_THRESHOLD,
        }
    }

    /// Same as [`GlobalStats::new`] with a custom prune threshold; `0.0`
    /// disables pruning except for exact zeros.
    pub fn with_prune_threshold(topics: usize, vocab: usize, threshold: f64) -> Self {
        GlobalStats {
            prune_threshold: threshold,
            ..Self::new(topics, vocab)
        }
    }

    /// Build from `(topic, word, count)` cells; totals are the row sums.
    pub fn from_entries(topics: usize, vocab: usize, entries: &[SparseEntry]) -> Result<Self> {
        let mut stats = Self::new(topics, vocab);
        for e in entries {
            let (k, v) = (e.topic as usize, e.word as usize);
            stats.check_cell(k, v)?;
            if !(e.value >= 0.0 && e.value.is_finite()) {
                return Err(Error::NegativeCount {
                    topic: k,
                    word: v,
                    value: e.value,
                });
            }
            if e.value > 0.0 {
                *stats.rows[k].entry(v).or_insert(0.0) += e.value;
            }
        }
        for (row, total) in stats.rows.iter().zip(stats.totals.iter_mut()) {
            *total = row.values().sum();
        }
        Ok(stats)
    }

    pub fn topics(&self) -> usize {
        self.rows.len()
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn count(&self, k: usize, v: usize) -> f64 {
        self.rows[k].get(&v).copied().unwrap_or(0.0)
    }

    pub fn total(&self, k: usize) -> f64 {
        self.totals[k]
    }

    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    pub fn row(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows[k].iter().map(|(&v, &c)| (v, c))
    }

    /// Number of stored cells.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    /// Sum of all topic totals.
    pub fn total_mass(&self) -> f64 {
        self.totals.iter().sum()
    }

    /// All stored cells in topic-major, word-ascending order.
    pub fn entries(&self) -> Vec<SparseEntry> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(k, row)| row.iter().map(move |(&v, &c)| SparseEntry::new(k, v, c)))
            .collect()
    }

    /// Independent deep copy.
    pub fn snapshot(&self) -> GlobalStats {
        self.clone()
    }

    fn check_cell(&self, k: usize, v: usize) -> Result<()> {
        if k >= self.topics() || v >= self.vocab {
            return Err(Error::OutOfRange {
                topic: k,
                word: v,
                topics: self.topics(),
                vocab: self.vocab,
            });
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &GlobalStats) -> Result<()> {
        if self.topics() != other.topics() || self.vocab != other.vocab {
            return Err(Error::DimensionMismatch {
                expected_topics: self.topics(),
                expected_vocab: self.vocab,
                topics: other.topics(),
                vocab: other.vocab,
            });
        }
        Ok(())
    }

    /// Drop the cell if it fell under the prune threshold, keeping the row
    /// total consistent.
    fn settle(&mut self, k: usize, v: usize) {
        if let Some(&c) = self.rows[k].get(&v) {
            if c <= 0.0 || c < self.prune_threshold {
                self.rows[k].remove(&v);
                self.totals[k] -= c;
                if self.rows[k].is_empty() {
                    self.totals[k] = 0.0;
                }
            }
        }
    }

    /// Add one unit of word `v` under topic `k`, without a document.
    pub fn increment(&mut self, k: usize, v: usize) {
        *self.rows[k].entry(v).or_insert(0.0) += 1.0;
        self.totals[k] += 1.0;
    }

    /// Remove one unit of word `v` from topic `k`.
    pub fn decrement(&mut self, k: usize, v: usize) -> Result<()> {
        match self.rows[k].get_mut(&v) {
            Some(c) if *c >= 1.0 - NEGATIVE_SLACK => {
                *c -= 1.0;
                self.totals[k] -= 1.0;
                self.settle(k, v);
                Ok(())
            }
            _ => Err(Error::CountUnderflow { topic: k, word: v }),
        }
    }

    /// Assign a token of word `v` to topic `k` in `doc`.
    pub fn add_token(&mut self, doc: &mut DocState, k: usize, v: usize) {
        self.increment(k, v);
        doc.ndk[k] += 1;
        doc.nd += 1;
    }

    /// Undo [`GlobalStats::add_token`]. Fails without modifying anything if
    /// the counts are already zero.
    pub fn remove_token(&mut self, doc: &mut DocState, k: usize, v: usize) -> Result<()> {
        if doc.ndk[k] == 0 {
            return Err(Error::CountUnderflow { topic: k, word: v });
        }
        self.decrement(k, v)?;
        doc.ndk[k] -= 1;
        doc.nd -= 1;
        Ok(())
    }

    /// Scale every count by `lambda`.
    pub fn apply_decay(&mut self, lambda: f64) -> Result<()> {
        check_lambda(lambda)?;
        if lambda == 1.0 {
            return Ok(());
        }
        let threshold = self.prune_threshold;
        for (row, total) in self.rows.iter_mut().zip(self.totals.iter_mut()) {
            *total *= lambda;
            row.retain(|_, c| {
                *c *= lambda;
                if *c < threshold {
                    *total -= *c;
                    false
                } else {
                    true
                }
            });
            if row.is_empty() {
                *total = 0.0;
            }
        }
        Ok(())
    }

    /// Posterior mean `(N_kv + beta) / (N_k + V beta)`.
    pub fn phi_mean(&self, hyper: &Hyper, k: usize, v: usize) -> f64 {
        (self.count(k, v) + hyper.beta) / (self.totals[k] + hyper.vocab_beta())
    }

    /// Dense matrix of posterior means.
    pub fn phi_matrix(&self, hyper: &Hyper) -> PhiMatrix {
        let v = self.vocab;
        let mut data = Vec::with_capacity(self.topics() * v);
        for (row, total) in self.rows.iter().zip(&self.totals) {
            let denom = total + hyper.vocab_beta();
            let base = data.len();
            data.resize(base + v, hyper.beta / denom);
            for (&w, &c) in row {
                data[base + w] = (c + hyper.beta) / denom;
            }
        }
        PhiMatrix {
            topics: self.topics(),
            vocab: v,
            data,
        }
    }

    /// `after - before` at every cell where they differ.
    pub fn delta_between(before: &GlobalStats, after: &GlobalStats) -> Result<SparseDelta> {
        before.check_same_shape(after)?;
        let mut entries = Vec::new();
        for (k, (b, a)) in before.rows.iter().zip(&after.rows).enumerate() {
            let mut bi = b.iter().peekable();
            let mut ai = a.iter().peekable();
            loop {
                let (v, diff) = match (bi.peek(), ai.peek()) {
                    (None, None) => break,
                    (Some(&(&vb, &cb)), None) => {
                        bi.next();
                        (vb, -cb)
                    }
                    (None, Some(&(&va, &ca))) => {
                        ai.next();
                        (va, ca)
                    }
                    (Some(&(&vb, &cb)), Some(&(&va, &ca))) => {
                        if vb < va {
                            bi.next();
                            (vb, -cb)
                        } else if va < vb {
                            ai.next();
                            (va, ca)
                        } else {
                            bi.next();
                            ai.next();
                            (va, ca - cb)
                        }
                    }
                };
                if diff != 0.0 {
                    entries.push(SparseEntry::new(k, v, diff));
                }
            }
        }
        Ok(SparseDelta { entries })
    }

    /// Add `delta`, then decay by `lambda`. Cells driven below zero by at most
    /// [`NEGATIVE_SLACK`] are clamped; anything worse rejects the whole
    /// delta and leaves the stats untouched.
    pub fn merge_delta(&mut self, delta: &SparseDelta, lambda: f64) -> Result<()> {
        check_lambda(lambda)?;
        for e in &delta.entries {
            let (k, v) = (e.topic as usize, e.word as usize);
            self.check_cell(k, v)?;
            let value = self.count(k, v) + e.value;
            if !value.is_finite() || value < -NEGATIVE_SLACK {
                return Err(Error::NegativeCount {
                    topic: k,
                    word: v,
                    value,
                });
            }
        }
        for e in &delta.entries {
            let (k, v) = (e.topic as usize, e.word as usize);
            let cell = self.rows[k].entry(v).or_insert(0.0);
            let old = *cell;
            *cell = (old + e.value).max(0.0);
            self.totals[k] += *cell - old;
            self.settle(k, v);
        }
        self.apply_decay(lambda)
    }
}

/// Free-function form of [`GlobalStats::delta_between`].
pub fn delta_between(before: &GlobalStats, after: &GlobalStats) -> Result<SparseDelta> {
    GlobalStats::delta_between(before, after)
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("decay {lambda} must lie in (0, 1]")))
    }
}

/// Dense K x V matrix whose rows are distributions over words.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiMatrix {
    topics: usize,
    vocab: usize,
    data: Vec<f64>,
}

impl PhiMatrix {
    /// Every row uniform.
    pub fn uniform(topics: usize, vocab: usize) -> Self {
        PhiMatrix {
            topics,
            vocab,
            data: vec![1.0 / vocab as f64; topics * vocab],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let topics = rows.len();
        let vocab = rows.first().map_or(0, Vec::len);
        if topics == 0 || vocab == 0 || rows.iter().any(|r| r.len() != vocab) {
            return Err(Error::InvalidArgument("phi rows must be non-empty and equally long".into()));
        }
        Ok(PhiMatrix {
            topics,
            vocab,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    #[inline]
    pub fn get(&self, k: usize, v: usize) -> f64 {
        self.data[k * self.vocab + v]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.vocab..(k + 1) * self.vocab]
    }

    pub fn set_row(&mut self, k: usize, row: &[f64]) {
        self.data[k * self.vocab..(k + 1) * self.vocab].copy_from_slice(row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn hyper(k: usize, v: usize) -> Hyper {
        Hyper::new(0.1, 0.03, k, v).unwrap()
    }

    #[test]
    fn fresh_stats_are_empty() {
        let h = hyper(2, 3);
        let s = GlobalStats::new(2, 3);
        assert_eq!(s.nnz(), 0);
        assert_eq!(s.totals(), &[0.0, 0.0]);
        for k in 0..2 {
            for v in 0..3 {
                assert!(close(s.phi_mean(&h, k, v), 1.0 / 3.0, 1e-15));
            }
        }
        assert!(GlobalStats::delta_between(&s, &s).unwrap().is_empty());
    }

    #[test]
    fn hyper_validation() {
        assert!(Hyper::new(0.0, 0.1, 2, 2).is_err());
        assert!(Hyper::new(0.1, -1.0, 2, 2).is_err());
        assert!(Hyper::new(0.1, 0.1, 0, 2).is_err());
        let d = Hyper::with_defaults(10).unwrap();
        assert_eq!((d.alpha, d.beta, d.topics), (0.1, 0.03, 50));
    }

    #[test]
    fn add_remove_tokens() {
        let mut s = GlobalStats::new(2, 3);
        let mut doc = DocState::new(2);
        let before = s.clone();
        s.add_token(&mut doc, 0, 2);
        s.remove_token(&mut doc, 0, 2).unwrap();
        assert_eq!(s, before);
        assert_eq!(doc.nd, 0);

        s.add_token(&mut doc, 0, 2);
        s.add_token(&mut doc, 0, 2);
        assert_eq!(s.count(0, 2), 2.0);
        assert_eq!(s.total(0), 2.0);
        assert_eq!(doc.ndk, vec![2, 0]);

        let mut empty = GlobalStats::new(2, 3);
        let mut d = DocState::new(2);
        assert!(matches!(
            empty.remove_token(&mut d, 1, 1),
            Err(Error::CountUnderflow { topic: 1, word: 1 })
        ));
    }

    #[test]
    fn decay_scales_and_prunes() {
        let mut s = GlobalStats::new(1, 2);
        for _ in 0..4 {
            s.increment(0, 0);
        }
        let same = s.clone();
        s.apply_decay(1.0).unwrap();
        assert_eq!(s, same);
        s.apply_decay(0.5).unwrap();
        assert_eq!(s.count(0, 0), 2.0);
        assert_eq!(s.total(0), 2.0);
        assert!(s.apply_decay(0.0).is_err());
        assert!(s.apply_decay(1.5).is_err());

        // A tiny cell next to a normal one: the tiny one disappears along with its mass.
        let mut s = GlobalStats::from_entries(
            1,
            2,
            &[SparseEntry::new(0, 0, 1.0), SparseEntry::new(0, 1, 1e-13)],
        )
        .unwrap();
        let total = s.total(0);
        s.apply_decay(0.5).unwrap();
        assert_eq!(s.nnz(), 1);
        assert!(close(s.total(0), total * 0.5 - 5e-14, 1e-18));
    }

    #[test]
    fn phi_and_theta_means() {
        let h = hyper(2, 5);
        let mut s = GlobalStats::new(2, 5);
        for _ in 0..3 {
            s.increment(0, 1);
        }
        for _ in 0..7 {
            s.increment(0, 4);
        }
        let p = s.phi_mean(&h, 0, 1);
        assert!(close(p, 3.03 / 10.15, 1e-12), "{p}");
        assert!(close(p, 0.298522, 1e-6));
        let row: f64 = (0..5).map(|v| s.phi_mean(&h, 0, v)).sum();
        assert!(close(row, 1.0, 1e-12));

        let e = DocState::new(4);
        let h4 = hyper(4, 5);
        assert!((0..4).all(|k| close(e.theta_mean(&h4, k), 0.25, 1e-15)));
        let d = DocState::from_assignments(2, vec![0, 0]).unwrap();
        let t = d.theta(&h);
        assert!(close(t[0], 2.1 / 2.2, 1e-12) && close(t[0], 0.954545, 1e-6));
        assert!(close(t[1], 0.1 / 2.2, 1e-12) && close(t[1], 0.045455, 1e-6));
        assert!(close(t.iter().sum::<f64>(), 1.0, 1e-12));
    }

    #[test]
    fn phi_matrix_matches_phi_mean() {
        let h = hyper(2, 4);
        let mut s = GlobalStats::new(2, 4);
        s.increment(1, 3);
        s.increment(1, 0);
        s.increment(0, 2);
        let m = s.phi_matrix(&h);
        for k in 0..2 {
            for v in 0..4 {
                assert_eq!(m.get(k, v), s.phi_mean(&h, k, v));
            }
        }
    }

    #[test]
    fn snapshot_is_independent() {
        let mut s = GlobalStats::new(2, 3);
        s.increment(1, 1);
        let mut copy = s.snapshot();
        copy.increment(0, 0);
        assert_eq!(s.count(0, 0), 0.0);
        assert!(GlobalStats::delta_between(&s, &s.snapshot()).unwrap().is_empty());
        assert_eq!(GlobalStats::new(1, 1).snapshot().nnz(), 0);
    }

    #[test]
    fn deltas() {
        let before = GlobalStats::new(2, 3);
        let mut after = GlobalStats::new(2, 3);
        for _ in 0..3 {
            after.increment(1, 2);
        }
        let d = delta_between(&before, &after).unwrap();
        assert_eq!(d.entries, vec![SparseEntry::new(1, 2, 3.0)]);

        let b = GlobalStats::from_entries(1, 2, &[SparseEntry::new(0, 1, 5.0)]).unwrap();
        let a = GlobalStats::from_entries(1, 2, &[SparseEntry::new(0, 1, 2.0)]).unwrap();
        assert_eq!(delta_between(&b, &a).unwrap().entries, vec![SparseEntry::new(0, 1, -3.0)]);

        assert!(matches!(
            delta_between(&GlobalStats::new(2, 3), &GlobalStats::new(2, 4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn merges() {
        let mut s = GlobalStats::new(2, 3);
        let delta = SparseDelta {
            entries: vec![SparseEntry::new(1, 2, 3.0)],
        };
        s.merge_delta(&delta, 0.7).unwrap();
        assert!(close(s.count(1, 2), 2.1, 1e-12));
        assert!(close(s.total(1), 2.1, 1e-12));

        let same = s.clone();
        s.merge_delta(&SparseDelta::default(), 1.0).unwrap();
        assert_eq!(s, same);

        let mut s = GlobalStats::from_entries(1, 1, &[SparseEntry::new(0, 0, 1.0)]).unwrap();
        s.merge_delta(
            &SparseDelta {
                entries: vec![SparseEntry::new(0, 0, -1.0)],
            },
            1.0,
        )
        .unwrap();
        assert_eq!(s.nnz(), 0);
        assert_eq!(s.total(0), 0.0);
    }

    #[test]
    fn merge_rejects_bad_deltas() {
        let mut s = GlobalStats::from_entries(1, 2, &[SparseEntry::new(0, 0, 1.0)]).unwrap();
        let orig = s.clone();
        let too_negative = SparseDelta {
            entries: vec![SparseEntry::new(0, 1, 1.0), SparseEntry::new(0, 0, -2.0)],
        };
        assert!(matches!(s.merge_delta(&too_negative, 1.0), Err(Error::NegativeCount { .. })));
        assert_eq!(s, orig);
        let out_of_range = SparseDelta {
            entries: vec![SparseEntry::new(3, 0, 1.0)],
        };
        assert!(matches!(s.merge_delta(&out_of_range, 1.0), Err(Error::OutOfRange { .. })));

        // Slightly negative noise is clamped to zero and pruned.
        let noise = SparseDelta {
            entries: vec![SparseEntry::new(0, 0, -1.0 - 1e-12)],
        };
        s.merge_delta(&noise, 1.0).unwrap();
        assert_eq!(s.nnz(), 0);
        assert_eq!(s.total(0), 0.0);
    }
}
