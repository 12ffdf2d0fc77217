//! Grouping equal-length packet sequences into clusters.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{CanonicalKey, Metric, MetricError, PacketSequence};

/// Sequences of equal length judged alike by the metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cluster {
    pub members: Vec<PacketSequence>,
}

impl Cluster {
    /// Sequence length shared by all members.
    pub fn seq_len(&self) -> usize {
        self.members.first().map_or(0, |m| m.len())
    }

    pub fn distinct_samples(&self) -> usize {
        let mut ids: Vec<_> = self.members.iter().map(|m| m.sample_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Clusters `seqs` under `metric`.
///
/// At `epsilon = 0`, when the metric provides canonical keys, sequences are
/// grouped by key and groups of at least `min_pts` become clusters. Otherwise
/// DBSCAN is run: a sequence is a core point when at least `min_pts`
/// sequences (itself included) lie within `epsilon`, and clusters are the
/// density-reachable sets. `Maximal` is never within `epsilon`.
pub fn cluster_sequences(
    seqs: Vec<PacketSequence>,
    metric: &Metric,
    epsilon: f64,
    min_pts: usize,
) -> Result<Vec<Cluster>, MetricError> {
    if epsilon == 0.0 {
        if let Some(keys) = seqs.iter().map(|s| metric.canonical_key(s)).collect::<Option<Vec<_>>>() {
            return Ok(group_by_key(seqs, keys, min_pts));
        }
    }
    dbscan(seqs, metric, epsilon, min_pts)
}

fn group_by_key(seqs: Vec<PacketSequence>, keys: Vec<Option<CanonicalKey>>, min_pts: usize) -> Vec<Cluster> {
    let mut groups: BTreeMap<CanonicalKey, Vec<PacketSequence>> = BTreeMap::new();
    for (s, k) in seqs.into_iter().zip(keys) {
        if let Some(k) = k {
            groups.entry(k).or_default().push(s);
        }
    }
    groups
        .into_values()
        .filter(|m| m.len() >= min_pts)
        .map(|members| Cluster { members })
        .collect()
}

/// Density-based clustering with the metric as distance function.
pub fn dbscan(
    seqs: Vec<PacketSequence>,
    metric: &Metric,
    epsilon: f64,
    min_pts: usize,
) -> Result<Vec<Cluster>, MetricError> {
    let n = seqs.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut v = Vec::new();
            for j in 0..n {
                if metric.distance(&seqs[i], &seqs[j])?.within(epsilon) {
                    v.push(j);
                }
            }
            Ok(v)
        })
        .collect::<Result<_, MetricError>>()?;
    let core: Vec<bool> = neighbors.iter().map(|v| v.len() >= min_pts).collect();

    const UNSEEN: usize = usize::MAX;
    let mut label = vec![UNSEEN; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if label[start] != UNSEEN || !core[start] {
            continue;
        }
        let c = clusters.len();
        let mut members = vec![start];
        label[start] = c;
        let mut queue = vec![start];
        while let Some(p) = queue.pop() {
            if !core[p] {
                continue;
            }
            for &q in &neighbors[p] {
                if label[q] == UNSEEN {
                    label[q] = c;
                    members.push(q);
                    queue.push(q);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }

    let mut slots: Vec<Option<PacketSequence>> = seqs.into_iter().map(Some).collect();
    Ok(clusters
        .into_iter()
        .map(|idx| Cluster {
            members: idx.into_iter().map(|i| slots[i].take().unwrap()).collect(),
        })
        .collect())
}
