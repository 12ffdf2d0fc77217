//! Synthetic NAT: several devices' samples seen as one.

use std::collections::BTreeMap;

use thiserror::Error;

use super::dataset::Dataset;
use crate::tabulation::{EventId, PacketRecord, SampleId, StreamId, TabulatedTrafficSample};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MergeError {
    #[error("nothing to merge")]
    Empty,
    #[error("corpora disagree on sample count ({0} vs {1})")]
    UnevenT(usize, usize),
    #[error("corpora disagree on event count ({0} vs {1})")]
    UnevenEvents(usize, usize),
}

/// Concatenates the rows of each part in order. Streams are renumbered
/// `0..` in order of (part, original stream id) so that ids never collide.
pub fn merge_samples(parts: &[&TabulatedTrafficSample], event_id: EventId, sample_id: SampleId) -> TabulatedTrafficSample {
    let mut records = Vec::new();
    let mut next: StreamId = 0;
    for part in parts {
        let map: BTreeMap<StreamId, StreamId> = part
            .stream_ids()
            .map(|id| {
                let n = next;
                next += 1;
                (id, n)
            })
            .collect();
        records.extend(part.records().iter().map(|r| PacketRecord {
            event_id,
            sample_id,
            stream_id: map[&r.stream_id],
            ..r.clone()
        }));
    }
    TabulatedTrafficSample::new(event_id, sample_id, records).expect("renumbered streams stay well formed")
}

/// Aligns events by rank across corpora: merged event `j` sample `i` merges
/// sample `i` of the `j`-th event (ascending id) of every corpus. Merged
/// events are numbered after the first corpus.
pub fn merge_corpora(name: &str, corpora: &[&Dataset]) -> Result<Dataset, MergeError> {
    let first = corpora.first().ok_or(MergeError::Empty)?;
    let n_events = first.events.len();
    let t = first.sample_count().unwrap_or(0);
    for c in &corpora[1..] {
        if c.events.len() != n_events {
            return Err(MergeError::UnevenEvents(n_events, c.events.len()));
        }
        let tc = c.sample_count().unwrap_or(0);
        if tc != t {
            return Err(MergeError::UnevenT(t, tc));
        }
    }
    let per_corpus: Vec<Vec<&Vec<TabulatedTrafficSample>>> = corpora.iter().map(|c| c.events.values().collect()).collect();
    let mut out = Dataset::new(name);
    for (j, &event_id) in first.events.keys().enumerate() {
        let samples = (0..t)
            .map(|i| {
                let parts: Vec<&TabulatedTrafficSample> = per_corpus.iter().map(|evs| &evs[j][i]).collect();
                merge_samples(&parts, event_id, i as SampleId)
            })
            .collect();
        out.events.insert(event_id, samples);
    }
    Ok(out)
}
