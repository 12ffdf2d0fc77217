//! Streaming detection of a summary seqnature in a tabulated traffic sample.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::fingerprint::{SummaryPacketSequence, SummarySeqnature};
use crate::metrics::{endpoint_id, EndpointId, Granularity, Metric, MetricError, TechniqueKind};
use crate::tabulation::{PacketRecord, StreamId, TabulatedTrafficSample};

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("vacuous fingerprint: the summary has no sequences")]
    Vacuous,
    #[error("window has {window} packets but the sequence has {seq}")]
    LengthMismatch { window: usize, seq: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Where a sequence first matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MatchLocation {
    pub stream_id: StreamId,
    /// Position of the window's last packet.
    pub end_position: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchResult {
    pub matched: bool,
    /// Per summary sequence, its first match.
    pub locations: Vec<Option<MatchLocation>>,
    pub packets_processed: usize,
    /// Largest number of packets held in stream buffers at once.
    pub peak_buffered: usize,
}

/// Sizes within range and directions observed, index by index.
pub fn sdbf_window_matches(window: &[&PacketRecord], seq: &SummaryPacketSequence) -> bool {
    window.len() == seq.len()
        && window.iter().zip(&seq.packets).all(|(r, p)| {
            p.size_min <= r.size && r.size <= p.size_max && p.directions.contains(&r.direction)
        })
}

/// Whether the `n` packets of `window` (one stream, `n = seq.len()`) are a
/// manifestation of `seq` under the metric's technique.
pub fn window_matches(window: &[&PacketRecord], seq: &SummaryPacketSequence, metric: &Metric) -> Result<bool, MatchError> {
    if window.len() != seq.len() {
        return Err(MatchError::LengthMismatch {
            window: window.len(),
            seq: seq.len(),
        });
    }
    let compiled = Compiled::new(seq, metric);
    Ok(compiled.matches(window, seq, metric))
}

/// Endpoint identifiers a summary sequence admits.
enum Endpoints {
    Any,
    PerIndex(Granularity, Vec<HashSet<EndpointId>>),
    First(Granularity, HashSet<EndpointId>),
}

struct Compiled {
    endpoints: Endpoints,
}

fn ids(domains: &std::collections::BTreeSet<crate::ingest::DomainLabel>, g: Granularity) -> HashSet<EndpointId> {
    domains.iter().filter_map(|d| endpoint_id(d, g)).collect()
}

impl Compiled {
    fn new(seq: &SummaryPacketSequence, metric: &Metric) -> Self {
        let kind = &metric.technique().kind;
        let endpoints = match kind.granularity() {
            Some(g) if *kind == TechniqueKind::Esdbf => {
                Endpoints::PerIndex(g, seq.packets.iter().map(|p| ids(&p.domains, g)).collect())
            }
            Some(g) => Endpoints::First(g, seq.packets.first().map(|p| ids(&p.domains, g)).unwrap_or_default()),
            None => Endpoints::Any,
        };
        Compiled { endpoints }
    }

    fn matches(&self, window: &[&PacketRecord], seq: &SummaryPacketSequence, metric: &Metric) -> bool {
        let kind = &metric.technique().kind;
        match &self.endpoints {
            Endpoints::Any => match kind {
                TechniqueKind::Custom(_) => metric.custom().unwrap().window_matches(window, seq),
                _ => sdbf_window_matches(window, seq),
            },
            Endpoints::PerIndex(g, sets) => {
                let Some(id) = endpoint_id(&window[0].domain, *g) else {
                    return false;
                };
                sdbf_window_matches(window, seq) && sets.iter().all(|s| s.contains(&id))
            }
            Endpoints::First(g, set) => endpoint_id(&window[0].domain, *g).is_some_and(|id| set.contains(&id)),
        }
    }
}

/// A summary prepared for matching against many samples.
pub struct Matcher<'a> {
    summary: &'a SummarySeqnature,
    metric: Metric,
    compiled: Vec<Compiled>,
}

impl<'a> Matcher<'a> {
    pub fn new(summary: &'a SummarySeqnature, metric: Metric) -> Result<Self, MatchError> {
        if summary.is_empty() {
            return Err(MatchError::Vacuous);
        }
        let compiled = summary.sequences.iter().map(|s| Compiled::new(s, &metric)).collect();
        Ok(Matcher {
            summary,
            metric,
            compiled,
        })
    }

    /// Binds the summary's technique; custom techniques need
    /// [`Matcher::new`] with a resolved metric.
    pub fn builtin(summary: &'a SummarySeqnature) -> Result<Self, MatchError> {
        Self::new(summary, Metric::builtin(summary.technique().clone())?)
    }

    /// Reads the sample row by row, keeping the `n_max` most recent packets
    /// of each stream, and tests every still-unmatched sequence against the
    /// tail of the buffer the new packet went into. Stops as soon as every
    /// sequence has matched.
    pub fn match_sample(&self, sample: &TabulatedTrafficSample) -> MatchResult {
        let seqs = &self.summary.sequences;
        let n_max = self.summary.n_max();
        let mut buffers: HashMap<StreamId, VecDeque<&PacketRecord>> = HashMap::new();
        let mut locations: Vec<Option<MatchLocation>> = vec![None; seqs.len()];
        let mut remaining = seqs.len();
        let mut buffered = 0usize;
        let mut peak = 0usize;
        let mut processed = 0usize;
        for r in sample.records() {
            processed += 1;
            let buf = buffers.entry(r.stream_id).or_insert_with(|| VecDeque::with_capacity(n_max));
            buf.push_back(r);
            if buf.len() > n_max {
                buf.pop_front();
            } else {
                buffered += 1;
                peak = peak.max(buffered);
            }
            let fill = buf.len();
            let window = buf.make_contiguous();
            for (k, seq) in seqs.iter().enumerate() {
                if locations[k].is_some() || seq.len() > fill {
                    continue;
                }
                if self.compiled[k].matches(&window[fill - seq.len()..], seq, &self.metric) {
                    locations[k] = Some(MatchLocation {
                        stream_id: r.stream_id,
                        end_position: r.position_in_stream,
                    });
                    remaining -= 1;
                }
            }
            if remaining == 0 {
                break;
            }
        }
        MatchResult {
            matched: remaining == 0,
            locations,
            packets_processed: processed,
            peak_buffered: peak,
        }
    }
}

/// Matches a summary with a built-in technique against one sample.
pub fn match_sample(summary: &SummarySeqnature, sample: &TabulatedTrafficSample) -> Result<MatchResult, MatchError> {
    Ok(Matcher::builtin(summary)?.match_sample(sample))
}
