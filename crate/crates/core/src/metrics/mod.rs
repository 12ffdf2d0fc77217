//! Packet-sequence distances for the five fingerprinting techniques and a
//! registry for user-defined metrics.

pub mod psl;
mod registry;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Direction, DomainLabel};
use crate::tabulation::{EventId, SampleId, StreamId};

pub use psl::esld_of;
pub use registry::{CustomMetric, MetricRegistry};

/// Size and direction of one packet in a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeqPacket {
    pub direction: Direction,
    pub size: u32,
}

/// `n` consecutive packets of one stream. All packets of a stream share its
/// domain label, so it is stored once.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSequence {
    pub event_id: EventId,
    pub sample_id: SampleId,
    pub stream_id: StreamId,
    /// Position of the first packet (1-based).
    pub start_position: u32,
    pub domain: DomainLabel,
    pub packets: Vec<SeqPacket>,
}

impl PacketSequence {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }
}

/// A non-negative distance, or the sentinel that exceeds every finite value.
#[derive(Debug, Clone, Copy)]
pub enum Distance {
    Finite(f64),
    Maximal,
}

impl Distance {
    pub const ZERO: Distance = Distance::Finite(0.0);

    pub fn is_zero(self) -> bool {
        matches!(self, Distance::Finite(d) if d == 0.0)
    }

    /// Whether this distance is within radius `eps`. `Maximal` never is.
    pub fn within(self, eps: f64) -> bool {
        matches!(self, Distance::Finite(d) if d <= eps)
    }
}

impl PartialEq for Distance {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Distance {}

impl PartialOrd for Distance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Distance {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Distance::Maximal, Distance::Maximal) => Ordering::Equal,
            (Distance::Maximal, _) => Ordering::Greater,
            (_, Distance::Maximal) => Ordering::Less,
            (Distance::Finite(a), Distance::Finite(b)) => a.total_cmp(b),
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Maximal => f.write_str("maximal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TechniqueKind {
    Sdbf,
    Esdbf,
    Ebf,
    Fqdnbf,
    Esldbf,
    Custom(String),
}

impl TechniqueKind {
    /// Whether sequences are compared by endpoint identity alone.
    pub fn is_endpoint(&self) -> bool {
        matches!(self, TechniqueKind::Ebf | TechniqueKind::Fqdnbf | TechniqueKind::Esldbf)
    }

    pub fn granularity(&self) -> Option<Granularity> {
        match self {
            TechniqueKind::Esdbf | TechniqueKind::Ebf => Some(Granularity::FqdnOrIp),
            TechniqueKind::Fqdnbf => Some(Granularity::Fqdn),
            TechniqueKind::Esldbf => Some(Granularity::Esld),
            _ => None,
        }
    }
}

impl fmt::Display for TechniqueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TechniqueKind::Sdbf => f.write_str("sdbf"),
            TechniqueKind::Esdbf => f.write_str("esdbf"),
            TechniqueKind::Ebf => f.write_str("ebf"),
            TechniqueKind::Fqdnbf => f.write_str("fqdnbf"),
            TechniqueKind::Esldbf => f.write_str("esldbf"),
            TechniqueKind::Custom(name) => write!(f, "custom:{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown technique `{0}` (expected sdbf, esdbf, ebf, fqdnbf, esldbf or custom:<name>)")]
pub struct ParseTechniqueError(pub String);

impl FromStr for TechniqueKind {
    type Err = ParseTechniqueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sdbf" => TechniqueKind::Sdbf,
            "esdbf" => TechniqueKind::Esdbf,
            "ebf" => TechniqueKind::Ebf,
            "fqdnbf" => TechniqueKind::Fqdnbf,
            "esldbf" => TechniqueKind::Esldbf,
            _ => match s.strip_prefix("custom:") {
                Some(name) if !name.is_empty() => TechniqueKind::Custom(name.to_string()),
                _ => return Err(ParseTechniqueError(s.to_string())),
            },
        })
    }
}

impl Serialize for TechniqueKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TechniqueKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A technique and its size slack `h` (bytes; used by SDBF and ESDBF).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Technique {
    pub kind: TechniqueKind,
    pub h: u32,
}

impl Technique {
    pub fn new(kind: TechniqueKind) -> Self {
        Technique { kind, h: 0 }
    }

    pub fn with_h(kind: TechniqueKind, h: u32) -> Self {
        Technique { kind, h }
    }

    pub fn sdbf() -> Self {
        Self::new(TechniqueKind::Sdbf)
    }

    pub fn esdbf() -> Self {
        Self::new(TechniqueKind::Esdbf)
    }

    pub fn ebf() -> Self {
        Self::new(TechniqueKind::Ebf)
    }

    pub fn fqdnbf() -> Self {
        Self::new(TechniqueKind::Fqdnbf)
    }

    pub fn esldbf() -> Self {
        Self::new(TechniqueKind::Esldbf)
    }
}

/// How endpoints are identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    /// Hostname when known, otherwise the IP address.
    FqdnOrIp,
    /// Hostname only.
    Fqdn,
    /// Registrable domain of the hostname.
    Esld,
}

/// An endpoint identifier at some granularity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EndpointId(pub Arc<str>);

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Endpoint identifier of a domain label, or `None` when the label carries
/// no identifier at this granularity (an IP label under FQDN or eSLD).
///
/// A hostname that is itself a public suffix has no eSLD; it is then
/// identified by the hostname, which keeps FQDN identity implying eSLD
/// identity.
pub fn endpoint_id(domain: &DomainLabel, granularity: Granularity) -> Option<EndpointId> {
    match granularity {
        Granularity::FqdnOrIp => Some(EndpointId(domain.value().into())),
        Granularity::Fqdn => domain.hostname().map(|h| EndpointId(h.into())),
        Granularity::Esld => {
            let host = domain.hostname()?;
            Some(EndpointId(esld_of(domain).unwrap_or_else(|| host.to_string()).into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("sequence lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no custom metric named `{0}` is registered")]
    UnknownCustom(String),
}

fn size_sum(p1: &PacketSequence, p2: &PacketSequence) -> Result<Option<u64>, MetricError> {
    if p1.len() != p2.len() {
        return Err(MetricError::LengthMismatch(p1.len(), p2.len()));
    }
    let mut sum = 0u64;
    for (a, b) in p1.packets.iter().zip(&p2.packets) {
        if a.direction != b.direction {
            return Ok(None);
        }
        sum += u64::from(a.size.abs_diff(b.size));
    }
    Ok(Some(sum))
}

fn apply_slack(sum: Option<u64>, h: u32) -> Distance {
    match sum {
        None => Distance::Maximal,
        Some(s) if s <= u64::from(h) => Distance::ZERO,
        Some(s) => Distance::Finite(s as f64),
    }
}

/// Sum of absolute size differences, or `Maximal` if directions differ at
/// any index.
pub fn sdbf_distance(p1: &PacketSequence, p2: &PacketSequence) -> Result<Distance, MetricError> {
    sdbf_distance_h(p1, p2, 0)
}

/// As [`sdbf_distance`], with sums up to `h` bytes treated as identical.
pub fn sdbf_distance_h(p1: &PacketSequence, p2: &PacketSequence, h: u32) -> Result<Distance, MetricError> {
    Ok(apply_slack(size_sum(p1, p2)?, h))
}

/// `Maximal` unless both sequences are exchanged with the same endpoint
/// (hostname, else IP); otherwise the SDBF distance.
pub fn esdbf_distance(p1: &PacketSequence, p2: &PacketSequence) -> Result<Distance, MetricError> {
    esdbf_distance_h(p1, p2, 0)
}

pub fn esdbf_distance_h(p1: &PacketSequence, p2: &PacketSequence, h: u32) -> Result<Distance, MetricError> {
    let sum = size_sum(p1, p2)?;
    if endpoint_id(&p1.domain, Granularity::FqdnOrIp) != endpoint_id(&p2.domain, Granularity::FqdnOrIp) {
        return Ok(Distance::Maximal);
    }
    Ok(apply_slack(sum, h))
}

/// 0 when both sequences have the same endpoint identifier at `granularity`,
/// otherwise `Maximal`.
pub fn endpoint_distance(p1: &PacketSequence, p2: &PacketSequence, granularity: Granularity) -> Distance {
    match (endpoint_id(&p1.domain, granularity), endpoint_id(&p2.domain, granularity)) {
        (Some(a), Some(b)) if a == b => Distance::ZERO,
        _ => Distance::Maximal,
    }
}

/// Equality token of one packet: containment of one sequence in another is
/// judged on these.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Packet(Direction, u32),
    EndpointPacket(EndpointId, Direction, u32),
    Endpoint(EndpointId),
}

/// Exact-equality key; two sequences are at distance 0 (with `h = 0`) iff
/// their keys are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey {
    pub endpoint: Option<EndpointId>,
    pub packets: Vec<SeqPacket>,
}

/// A technique bound to its implementation.
#[derive(Clone)]
pub struct Metric {
    technique: Technique,
    custom: Option<Arc<dyn CustomMetric>>,
}

impl fmt::Debug for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Metric").field("technique", &self.technique).finish()
    }
}

impl Metric {
    /// Binds a built-in technique. Custom techniques need a registry.
    pub fn builtin(technique: Technique) -> Result<Self, MetricError> {
        Self::resolve(technique, &MetricRegistry::default())
    }

    pub fn resolve(technique: Technique, registry: &MetricRegistry) -> Result<Self, MetricError> {
        let custom = match &technique.kind {
            TechniqueKind::Custom(name) => {
                Some(registry.get(name).ok_or_else(|| MetricError::UnknownCustom(name.clone()))?)
            }
            _ => None,
        };
        Ok(Metric { technique, custom })
    }

    pub fn technique(&self) -> &Technique {
        &self.technique
    }

    pub fn distance(&self, p1: &PacketSequence, p2: &PacketSequence) -> Result<Distance, MetricError> {
        let h = self.technique.h;
        match &self.technique.kind {
            TechniqueKind::Sdbf => sdbf_distance_h(p1, p2, h),
            TechniqueKind::Esdbf => esdbf_distance_h(p1, p2, h),
            k @ (TechniqueKind::Ebf | TechniqueKind::Fqdnbf | TechniqueKind::Esldbf) => {
                Ok(endpoint_distance(p1, p2, k.granularity().unwrap()))
            }
            TechniqueKind::Custom(_) => self.custom.as_ref().unwrap().distance(p1, p2, h),
        }
    }

    /// Endpoint identifier of a sequence, for techniques that use one.
    pub fn endpoint(&self, seq: &PacketSequence) -> Option<EndpointId> {
        endpoint_id(&seq.domain, self.technique.kind.granularity()?)
    }

    /// Whether a sequence can be at distance 0 from anything (itself
    /// included).
    pub fn has_identity(&self, seq: &PacketSequence) -> bool {
        match &self.technique.kind {
            TechniqueKind::Fqdnbf | TechniqueKind::Esldbf => self.endpoint(seq).is_some(),
            TechniqueKind::Custom(_) => self.distance(seq, seq).map(|d| d.is_zero()).unwrap_or(false),
            _ => true,
        }
    }

    /// Exact-grouping key, available when distance 0 is an equivalence
    /// relation decided by key equality (`h = 0`, or an endpoint technique).
    /// `Some(None)` marks a sequence without identity.
    pub fn canonical_key(&self, seq: &PacketSequence) -> Option<Option<CanonicalKey>> {
        let kind = &self.technique.kind;
        if kind.is_endpoint() {
            return Some(self.endpoint(seq).map(|e| CanonicalKey {
                endpoint: Some(e),
                packets: Vec::new(),
            }));
        }
        if self.technique.h != 0 {
            return None;
        }
        match kind {
            TechniqueKind::Sdbf => Some(Some(CanonicalKey {
                endpoint: None,
                packets: seq.packets.clone(),
            })),
            TechniqueKind::Esdbf => Some(Some(CanonicalKey {
                endpoint: self.endpoint(seq),
                packets: seq.packets.clone(),
            })),
            TechniqueKind::Custom(_) => self.custom.as_ref().unwrap().canonical_key(seq),
            _ => unreachable!(),
        }
    }

    /// Per-packet equality tokens of a sequence.
    pub fn tokens(&self, seq: &PacketSequence) -> Vec<Token> {
        match &self.technique.kind {
            TechniqueKind::Sdbf => seq.packets.iter().map(|p| Token::Packet(p.direction, p.size)).collect(),
            TechniqueKind::Esdbf => {
                let e = self.endpoint(seq).expect("ESDBF always identifies endpoints");
                seq.packets
                    .iter()
                    .map(|p| Token::EndpointPacket(e.clone(), p.direction, p.size))
                    .collect()
            }
            TechniqueKind::Ebf | TechniqueKind::Fqdnbf | TechniqueKind::Esldbf => match self.endpoint(seq) {
                Some(e) => vec![Token::Endpoint(e); seq.len()],
                None => Vec::new(),
            },
            TechniqueKind::Custom(_) => self.custom.as_ref().unwrap().tokens(seq),
        }
    }

    pub fn custom(&self) -> Option<&Arc<dyn CustomMetric>> {
        self.custom.as_ref()
    }
}

#[cfg(test)]
mod tests;
