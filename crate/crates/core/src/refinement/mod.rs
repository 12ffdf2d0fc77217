//! Iterative fingerprint refinement: window formation, clustering, cluster
//! selection and suppression of shorter duplicates.

mod cluster;
mod config;
pub mod index;
pub mod suffix_tree;

use std::cmp::Reverse;

use log::debug;
use thiserror::Error;

use crate::fingerprint::Seqnature;
use crate::metrics::{Metric, MetricError, PacketSequence, SeqPacket, Token};
use crate::tabulation::{EventId, TabulatedTrafficSample};

pub use cluster::{cluster_sequences, dbscan, Cluster};
pub use config::{ConfigError, RefinementConfig};
pub use index::{LinearScanIndex, SequenceIndex, SuffixTreeIndex};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("expected {expected} samples (T), got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("samples belong to different events ({0} and {1})")]
    MixedEvents(EventId, EventId),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// All windows of length `n` over the first `min(prefix_len, len)` packets of
/// every stream, in sample, stream and position order.
pub fn form_sequences(samples: &[TabulatedTrafficSample], n: usize, prefix_len: usize) -> Vec<PacketSequence> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    for s in samples {
        for (stream_id, records) in s.streams() {
            let head = &records[..records.len().min(prefix_len)];
            if head.len() < n {
                continue;
            }
            let packets: Vec<SeqPacket> = head
                .iter()
                .map(|r| SeqPacket {
                    direction: r.direction,
                    size: r.size,
                })
                .collect();
            for (i, w) in packets.windows(n).enumerate() {
                out.push(PacketSequence {
                    event_id: s.event_id(),
                    sample_id: s.sample_id(),
                    stream_id,
                    start_position: i as u32 + 1,
                    domain: head[0].domain.clone(),
                    packets: w.to_vec(),
                });
            }
        }
    }
    out
}

/// Keeps the clusters that span at least `min_samples` samples and none of
/// whose members is already contained in `accepted`. Accepted clusters are
/// added to the index at once, so later candidates of the same round are
/// checked against them too. Candidates are considered by decreasing size,
/// then by their smallest member's token string.
pub fn select_clusters<I: SequenceIndex>(
    clusters: Vec<Cluster>,
    min_samples: usize,
    accepted: &mut I,
    metric: &Metric,
) -> Vec<Cluster> {
    let mut candidates: Vec<(Vec<Vec<Token>>, Cluster)> = clusters
        .into_iter()
        .map(|c| {
            let mut tokens: Vec<Vec<Token>> = c.members.iter().map(|m| metric.tokens(m)).collect();
            tokens.sort();
            tokens.dedup();
            (tokens, c)
        })
        .collect();
    candidates.sort_by(|a, b| {
        (Reverse(a.1.members.len()), &a.0[0]).cmp(&(Reverse(b.1.members.len()), &b.0[0]))
    });
    let mut kept = Vec::new();
    for (tokens, c) in candidates {
        if c.distinct_samples() < min_samples {
            continue;
        }
        if tokens.iter().any(|t| accepted.contains(t)) {
            continue;
        }
        for t in &tokens {
            accepted.insert(t);
        }
        kept.push(c);
    }
    kept
}

/// Runs refinement with an explicit containment index.
pub fn refine_with_index<I: SequenceIndex>(
    samples: &[TabulatedTrafficSample],
    config: &RefinementConfig,
    metric: &Metric,
    index: &mut I,
) -> Result<Vec<Cluster>, RefineError> {
    config.validate()?;
    if samples.len() != config.sample_count {
        return Err(RefineError::SampleCount {
            expected: config.sample_count,
            got: samples.len(),
        });
    }
    if let Some(first) = samples.first() {
        if let Some(other) = samples.iter().find(|s| s.event_id() != first.event_id()) {
            return Err(RefineError::MixedEvents(first.event_id(), other.event_id()));
        }
    }
    let mut clusters = Vec::new();
    for n in (config.n_min..=config.prefix_len).rev() {
        let seqs = form_sequences(samples, n, config.prefix_len);
        if seqs.is_empty() {
            continue;
        }
        let found = cluster_sequences(seqs, metric, config.epsilon, config.min_pts)?;
        let kept = select_clusters(found, config.min_samples, index, metric);
        debug!("n={n}: accepted {} cluster(s)", kept.len());
        clusters.extend(kept);
    }
    Ok(clusters)
}

/// Extracts the complete-form seqnature of one event from its `T` samples.
pub fn refine(
    samples: &[TabulatedTrafficSample],
    config: &RefinementConfig,
    metric: &Metric,
) -> Result<Seqnature, RefineError> {
    let clusters = refine_with_index(samples, config, metric, &mut SuffixTreeIndex::new())?;
    let event_id = samples.first().map_or(0, |s| s.event_id());
    Ok(Seqnature {
        event_id,
        dataset: None,
        config: config.clone(),
        clusters,
    })
}
