use std::collections::BTreeMap;
use std::sync::Arc;

use super::{CanonicalKey, Distance, MetricError, PacketSequence, Token};
use crate::fingerprint::SummaryPacketSequence;
use crate::tabulation::PacketRecord;

/// A user-defined packet-sequence metric, selected by name as
/// `custom:<name>`.
///
/// Only `distance` is required. Without `canonical_key` the generic
/// density clustering path is used even at radius 0. The default `tokens`
/// and `window_matches` compare sizes and directions like SDBF.
pub trait CustomMetric: Send + Sync {
    /// Distance between two sequences; `h` is the configured size slack.
    fn distance(&self, p1: &PacketSequence, p2: &PacketSequence, h: u32) -> Result<Distance, MetricError>;

    fn canonical_key(&self, _seq: &PacketSequence) -> Option<Option<CanonicalKey>> {
        None
    }

    fn tokens(&self, seq: &PacketSequence) -> Vec<Token> {
        seq.packets.iter().map(|p| Token::Packet(p.direction, p.size)).collect()
    }

    fn window_matches(&self, window: &[&PacketRecord], seq: &SummaryPacketSequence) -> bool {
        crate::matcher::sdbf_window_matches(window, seq)
    }
}

/// Named custom metrics.
#[derive(Clone, Default)]
pub struct MetricRegistry {
    metrics: BTreeMap<String, Arc<dyn CustomMetric>>,
}

impl MetricRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `metric` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: &str, metric: Arc<dyn CustomMetric>) {
        self.metrics.insert(name.to_string(), metric);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn CustomMetric>> {
        self.metrics.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.metrics.keys().map(String::as_str)
    }
}

impl std::fmt::Debug for MetricRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.metrics.keys()).finish()
    }
}
