//! Closed-world false-positive scanning.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::Dataset;
use crate::fingerprint::SummarySeqnature;
use crate::matcher::{MatchError, Matcher};
use crate::metrics::Metric;
use crate::tabulation::EventId;

/// Half-open count bins built from ascending edges: edges `0,10,100` give
/// `0`, `1-10`, `11-100` and `101+`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bins {
    edges: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BinsError {
    #[error("bin edges must be nonempty, start at 0 and strictly increase: `{0}`")]
    Invalid(String),
}

impl Default for Bins {
    fn default() -> Self {
        Bins { edges: vec![0, 10, 100] }
    }
}

impl Bins {
    pub fn new(edges: Vec<u64>) -> Result<Self, BinsError> {
        let ok = edges.first() == Some(&0) && edges.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(BinsError::Invalid(format!("{edges:?}")));
        }
        Ok(Bins { edges })
    }

    pub fn parse(text: &str) -> Result<Self, BinsError> {
        let edges = text
            .split(',')
            .map(|s| s.trim().parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| BinsError::Invalid(text.to_string()))?;
        Self::new(edges)
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = vec!["0".to_string()];
        for w in self.edges.windows(2) {
            out.push(format!("{}-{}", w[0] + 1, w[1]));
        }
        out.push(format!("{}+", self.edges.last().unwrap() + 1));
        out
    }

    pub fn index_of(&self, count: u64) -> usize {
        self.edges.partition_point(|&e| e < count)
    }

    pub fn label(&self, count: u64) -> String {
        self.labels().swap_remove(self.index_of(count))
    }
}

/// A summary fingerprint and where its event lives.
#[derive(Debug, Clone)]
pub struct ScanFingerprint {
    pub dataset: String,
    pub summary: SummarySeqnature,
}

impl ScanFingerprint {
    pub fn key(&self) -> String {
        format!("{}:{}", self.dataset, self.summary.event_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FpEntry {
    pub dataset: String,
    pub event_id: EventId,
    pub technique: String,
    /// Distinct foreign events with at least one matching sample.
    pub foreign_events: BTreeSet<(String, EventId)>,
    /// Matching foreign samples in total; reported, never binned.
    pub fp_samples: usize,
    pub bin: String,
    /// Own-event samples matched, and the own-event sample count, when the
    /// own event was among the scanned datasets.
    pub own_matched: Option<(usize, usize)>,
}

impl FpEntry {
    pub fn fp_events(&self) -> usize {
        self.foreign_events.len()
    }

    /// Distinct foreign events per scanned dataset.
    pub fn per_dataset(&self) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for (d, _) in &self.foreign_events {
            *m.entry(d.as_str()).or_insert(0) += 1;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FalsePositiveReport {
    pub bins: Vec<String>,
    pub entries: Vec<FpEntry>,
}

impl FalsePositiveReport {
    /// Fingerprint counts per bin for every `(technique, fingerprint dataset,
    /// scanned dataset)` cell. Bins use the per-dataset distinct event count.
    pub fn cells(&self, bins: &Bins, datasets: &[String]) -> BTreeMap<(String, String, String), Vec<usize>> {
        let mut out: BTreeMap<(String, String, String), Vec<usize>> = BTreeMap::new();
        for e in &self.entries {
            let per = e.per_dataset();
            for d in datasets {
                let c = per.get(d.as_str()).copied().unwrap_or(0);
                let row = out
                    .entry((e.technique.clone(), e.dataset.clone(), d.clone()))
                    .or_insert_with(|| vec![0; bins.labels().len()]);
                row[bins.index_of(c as u64)] += 1;
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum FpError {
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("journal {path}: {source}")]
    Journal { path: PathBuf, source: std::io::Error },
    #[error("journal {path} line {line}: {message}")]
    BadJournal { path: PathBuf, line: usize, message: String },
}

/// One finished shard: a fingerprint scanned against one event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub fingerprint: String,
    pub dataset: String,
    pub event_id: EventId,
    pub matched_samples: usize,
    pub samples: usize,
}

/// Append-only progress journal; one JSON record per line.
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Opens (creating if needed) and returns the records already present.
    /// A partial last line from an interrupted write is ignored.
    pub fn open(path: &Path) -> Result<(Self, Vec<JournalRecord>), FpError> {
        let err = |source| FpError::Journal {
            path: path.to_path_buf(),
            source,
        };
        let mut done = Vec::new();
        if path.exists() {
            let text = fs::read(path).map_err(err)?;
            let complete = text.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            for (i, line) in BufReader::new(&text[..complete]).lines().enumerate() {
                let line = line.map_err(err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec = serde_json::from_str(&line).map_err(|e| FpError::BadJournal {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                done.push(rec);
            }
            if complete < text.len() {
                let f = OpenOptions::new().write(true).open(path).map_err(err)?;
                f.set_len(complete as u64).map_err(err)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
        Ok((
            Journal {
                path: path.to_path_buf(),
                file,
            },
            done,
        ))
    }

    pub fn append(&mut self, recs: &[JournalRecord]) -> Result<(), FpError> {
        let mut buf = String::new();
        for r in recs {
            buf.push_str(&serde_json::to_string(r).expect("journal records serialize"));
            buf.push('\n');
        }
        self.file
            .write_all(buf.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|source| FpError::Journal {
                path: self.path.clone(),
                source,
            })
    }
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub bins: Bins,
    /// Shards per journal flush.
    pub batch_size: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            bins: Bins::default(),
            batch_size: 256,
        }
    }
}

/// Matches every fingerprint against every sample of every event of the
/// given datasets. Samples of the fingerprint's own event (same dataset
/// name and event id) are never counted as false positives.
///
/// With a journal, finished shards are appended after each batch and
/// skipped when the scan is resumed.
pub fn false_positive_scan(
    fingerprints: &[(ScanFingerprint, Metric)],
    datasets: &[&Dataset],
    options: &ScanOptions,
    mut journal: Option<&mut Journal>,
    resumed: &[JournalRecord],
) -> Result<FalsePositiveReport, FpError> {
    let matchers: Vec<Matcher<'_>> = fingerprints
        .iter()
        .map(|(f, m)| Matcher::new(&f.summary, m.clone()))
        .collect::<Result<_, _>>()?;
    let keys: Vec<String> = fingerprints.iter().map(|(f, _)| f.key()).collect();

    let mut results: Vec<JournalRecord> = Vec::new();
    let mut done: HashSet<(String, String, EventId)> = HashSet::new();
    let wanted: HashSet<&str> = keys.iter().map(String::as_str).collect();
    for r in resumed {
        if wanted.contains(r.fingerprint.as_str()) && done.insert((r.fingerprint.clone(), r.dataset.clone(), r.event_id)) {
            results.push(r.clone());
        }
    }

    let mut shards: Vec<(usize, usize, EventId)> = Vec::new();
    for (fi, key) in keys.iter().enumerate() {
        for (di, ds) in datasets.iter().enumerate() {
            for &e in ds.events.keys() {
                if !done.contains(&(key.clone(), ds.name.clone(), e)) {
                    shards.push((fi, di, e));
                }
            }
        }
    }
    if !resumed.is_empty() {
        info!("resuming: {} shard(s) already done, {} to go", results.len(), shards.len());
    }

    for batch in shards.chunks(options.batch_size.max(1)) {
        let recs: Vec<JournalRecord> = batch
            .par_iter()
            .map(|&(fi, di, e)| {
                let ds = datasets[di];
                let samples = &ds.events[&e];
                let matched = samples.iter().filter(|s| matchers[fi].match_sample(s).matched).count();
                JournalRecord {
                    fingerprint: keys[fi].clone(),
                    dataset: ds.name.clone(),
                    event_id: e,
                    matched_samples: matched,
                    samples: samples.len(),
                }
            })
            .collect();
        if let Some(j) = journal.as_deref_mut() {
            j.append(&recs)?;
        }
        results.extend(recs);
    }

    let mut by_fp: BTreeMap<&str, Vec<&JournalRecord>> = BTreeMap::new();
    for r in &results {
        by_fp.entry(r.fingerprint.as_str()).or_default().push(r);
    }
    let entries = fingerprints
        .iter()
        .zip(&keys)
        .map(|((f, _), key)| {
            let mut foreign_events = BTreeSet::new();
            let mut fp_samples = 0;
            let mut own_matched = None;
            for r in by_fp.get(key.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
                if r.dataset == f.dataset && r.event_id == f.summary.event_id {
                    own_matched = Some((r.matched_samples, r.samples));
                } else if r.matched_samples > 0 {
                    foreign_events.insert((r.dataset.clone(), r.event_id));
                    fp_samples += r.matched_samples;
                }
            }
            FpEntry {
                dataset: f.dataset.clone(),
                event_id: f.summary.event_id,
                technique: f.summary.technique().kind.to_string(),
                bin: options.bins.label(foreign_events.len() as u64),
                foreign_events,
                fp_samples,
                own_matched,
            }
        })
        .collect();
    Ok(FalsePositiveReport {
        bins: options.bins.labels(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_partition_counts() {
        let b = Bins::default();
        assert_eq!(b.labels(), vec!["0", "1-10", "11-100", "101+"]);
        for (c, l) in [(0, "0"), (1, "1-10"), (3, "1-10"), (10, "1-10"), (11, "11-100"), (100, "11-100"), (101, "101+"), (150, "101+")] {
            assert_eq!(b.label(c), l, "{c}");
        }
        assert!(Bins::parse("1,10").is_err());
        assert!(Bins::parse("0,10,10").is_err());
        assert_eq!(Bins::parse("0,5").unwrap().labels(), vec!["0", "1-5", "6+"]);
    }

    #[test]
    fn journal_drops_partial_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let rec = JournalRecord {
            fingerprint: "d:1".into(),
            dataset: "d".into(),
            event_id: 2,
            matched_samples: 1,
            samples: 3,
        };
        {
            let (mut j, done) = Journal::open(&path).unwrap();
            assert!(done.is_empty());
            j.append(std::slice::from_ref(&rec)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"fingerprint\":\"d:").unwrap();
        drop(f);
        let (mut j, done) = Journal::open(&path).unwrap();
        assert_eq!(done, vec![rec.clone()]);
        j.append(std::slice::from_ref(&rec)).unwrap();
        let (_, done) = Journal::open(&path).unwrap();
        assert_eq!(done.len(), 2);
    }
}
