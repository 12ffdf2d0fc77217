//! Seqnatures in complete and summary form, and their JSON files.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Direction, DomainLabel};
use crate::metrics::{Technique, TechniqueKind};
use crate::refinement::{Cluster, RefinementConfig};
use crate::tabulation::EventId;

pub const SCHEMA_VERSION: u32 = 1;

/// Complete form: the accepted clusters of packet sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Seqnature {
    pub event_id: EventId,
    /// Name of the dataset the event belongs to, when known.
    pub dataset: Option<String>,
    pub config: RefinementConfig,
    pub clusters: Vec<Cluster>,
}

impl Seqnature {
    pub fn technique(&self) -> &Technique {
        &self.config.technique
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Observed feature values at one index of a summarized cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryPacket {
    pub size_min: u32,
    pub size_max: u32,
    pub directions: BTreeSet<Direction>,
    pub domains: BTreeSet<DomainLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryPacketSequence {
    pub packets: Vec<SummaryPacket>,
}

impl SummaryPacketSequence {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }
}

/// Summary form: one condensed sequence per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SummarySeqnature {
    pub event_id: EventId,
    pub dataset: Option<String>,
    pub config: RefinementConfig,
    pub sequences: Vec<SummaryPacketSequence>,
}

impl SummarySeqnature {
    pub fn technique(&self) -> &Technique {
        &self.config.technique
    }

    /// Length of the longest sequence.
    pub fn n_max(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

/// Condenses a cluster: per index, the size range and the observed
/// direction and domain sets.
pub fn summarize_cluster(c: &Cluster) -> SummaryPacketSequence {
    let n = c.seq_len();
    let packets = (0..n)
        .map(|i| {
            let mut p = SummaryPacket {
                size_min: u32::MAX,
                size_max: 0,
                directions: BTreeSet::new(),
                domains: BTreeSet::new(),
            };
            for m in &c.members {
                let q = m.packets[i];
                p.size_min = p.size_min.min(q.size);
                p.size_max = p.size_max.max(q.size);
                p.directions.insert(q.direction);
                p.domains.insert(m.domain.clone());
            }
            p
        })
        .collect();
    SummaryPacketSequence { packets }
}

pub fn summarize(s: &Seqnature) -> SummarySeqnature {
    SummarySeqnature {
        event_id: s.event_id,
        dataset: s.dataset.clone(),
        config: s.config.clone(),
        sequences: s.clusters.iter().map(summarize_cluster).collect(),
    }
}

/// Either form, as stored in a fingerprint file.
#[derive(Debug, Clone, PartialEq)]
pub enum Fingerprint {
    Complete(Seqnature),
    Summary(SummarySeqnature),
}

impl Fingerprint {
    pub fn event_id(&self) -> EventId {
        match self {
            Fingerprint::Complete(s) => s.event_id,
            Fingerprint::Summary(s) => s.event_id,
        }
    }
}

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid fingerprint file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing or non-integer schema_version")]
    NoVersion,
    #[error("unsupported schema_version {0} (this build reads version {SCHEMA_VERSION})")]
    Version(u64),
    #[error("invalid fingerprint: {0}")]
    Invalid(String),
    #[error("expected a {expected} fingerprint, found the {found} form")]
    WrongForm { expected: &'static str, found: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Form {
    Complete,
    Summary,
}

/// Refinement settings as written into fingerprint and config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigRecord {
    pub prefix_len: usize,
    pub n_min: usize,
    pub sample_count: usize,
    pub min_samples: usize,
    pub epsilon: f64,
    pub min_pts: usize,
    pub h: u32,
}

impl ConfigRecord {
    pub fn from_config(c: &RefinementConfig) -> Self {
        ConfigRecord {
            prefix_len: c.prefix_len,
            n_min: c.n_min,
            sample_count: c.sample_count,
            min_samples: c.min_samples,
            epsilon: c.epsilon,
            min_pts: c.min_pts,
            h: c.technique.h,
        }
    }

    pub fn into_config(self, kind: TechniqueKind) -> RefinementConfig {
        RefinementConfig {
            prefix_len: self.prefix_len,
            n_min: self.n_min,
            sample_count: self.sample_count,
            min_samples: self.min_samples,
            epsilon: self.epsilon,
            min_pts: self.min_pts,
            technique: Technique::with_h(kind, self.h),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRepr {
    schema_version: u32,
    form: Form,
    event_id: EventId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    technique: TechniqueKind,
    config: ConfigRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clusters: Option<Vec<Cluster>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sequences: Option<Vec<SummaryPacketSequence>>,
}

fn invalid(msg: impl Into<String>) -> FingerprintError {
    FingerprintError::Invalid(msg.into())
}

fn check_summary(seqs: &[SummaryPacketSequence]) -> Result<(), FingerprintError> {
    for (k, s) in seqs.iter().enumerate() {
        if s.packets.is_empty() {
            return Err(invalid(format!("sequence {k} is empty")));
        }
        for (i, p) in s.packets.iter().enumerate() {
            if p.size_min > p.size_max {
                return Err(invalid(format!("sequence {k} index {i}: size_min > size_max")));
            }
            if p.directions.is_empty() || p.domains.is_empty() {
                return Err(invalid(format!("sequence {k} index {i}: empty direction or domain set")));
            }
        }
    }
    Ok(())
}

fn check_clusters(event_id: EventId, clusters: &[Cluster]) -> Result<(), FingerprintError> {
    for (k, c) in clusters.iter().enumerate() {
        let n = c.seq_len();
        if n == 0 {
            return Err(invalid(format!("cluster {k} has no members or empty sequences")));
        }
        if c.members.iter().any(|m| m.len() != n || m.event_id != event_id) {
            return Err(invalid(format!("cluster {k} mixes lengths or events")));
        }
    }
    Ok(())
}

pub fn to_json(f: &Fingerprint) -> String {
    let repr = match f {
        Fingerprint::Complete(s) => FileRepr {
            schema_version: SCHEMA_VERSION,
            form: Form::Complete,
            event_id: s.event_id,
            dataset: s.dataset.clone(),
            technique: s.config.technique.kind.clone(),
            config: ConfigRecord::from_config(&s.config),
            clusters: Some(s.clusters.clone()),
            sequences: None,
        },
        Fingerprint::Summary(s) => FileRepr {
            schema_version: SCHEMA_VERSION,
            form: Form::Summary,
            event_id: s.event_id,
            dataset: s.dataset.clone(),
            technique: s.config.technique.kind.clone(),
            config: ConfigRecord::from_config(&s.config),
            clusters: None,
            sequences: Some(s.sequences.clone()),
        },
    };
    let mut out = serde_json::to_string_pretty(&repr).expect("fingerprints serialize");
    out.push('\n');
    out
}

pub fn from_json(text: &str) -> Result<Fingerprint, FingerprintError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or(FingerprintError::NoVersion)?;
    if version != u64::from(SCHEMA_VERSION) {
        return Err(FingerprintError::Version(version));
    }
    let repr: FileRepr = serde_json::from_value(value)?;
    let config = repr.config.into_config(repr.technique);
    match (repr.form, repr.clusters, repr.sequences) {
        (Form::Complete, Some(clusters), None) => {
            check_clusters(repr.event_id, &clusters)?;
            Ok(Fingerprint::Complete(Seqnature {
                event_id: repr.event_id,
                dataset: repr.dataset,
                config,
                clusters,
            }))
        }
        (Form::Summary, None, Some(sequences)) => {
            check_summary(&sequences)?;
            Ok(Fingerprint::Summary(SummarySeqnature {
                event_id: repr.event_id,
                dataset: repr.dataset,
                config,
                sequences,
            }))
        }
        (Form::Complete, _, _) => Err(invalid("complete form needs `clusters` and no `sequences`")),
        (Form::Summary, _, _) => Err(invalid("summary form needs `sequences` and no `clusters`")),
    }
}

/// Writes atomically through a temporary file in the target directory.
pub fn write_fingerprint(f: &Fingerprint, path: &Path) -> Result<(), FingerprintError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    fs::write(tmp.path(), to_json(f))?;
    tmp.persist(path).map_err(|e| FingerprintError::Io(e.error))?;
    Ok(())
}

pub fn read_fingerprint(path: &Path) -> Result<Fingerprint, FingerprintError> {
    from_json(&fs::read_to_string(path)?)
}

/// Reads a summary-form file; complete-form files are rejected.
pub fn read_summary(path: &Path) -> Result<SummarySeqnature, FingerprintError> {
    match read_fingerprint(path)? {
        Fingerprint::Summary(s) => Ok(s),
        Fingerprint::Complete(_) => Err(FingerprintError::WrongForm {
            expected: "summary",
            found: "complete",
        }),
    }
}
