//! Packet direction and server domain labels.

use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Direction of a packet relative to the fingerprinted device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Sent by the device.
    Upstream,
    /// Received by the device.
    Downstream,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Upstream => "upstream",
            Direction::Downstream => "downstream",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown direction `{0}` (expected `upstream` or `downstream`)")]
pub struct ParseDirectionError(pub String);

impl FromStr for Direction {
    type Err = ParseDirectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "upstream" => Ok(Direction::Upstream),
            "downstream" => Ok(Direction::Downstream),
            other => Err(ParseDirectionError(other.to_string())),
        }
    }
}

/// Where a [`DomainLabel`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    /// TLS Server Name Indication of the stream's Client Hello.
    Sni,
    /// Name queried in the most recent DNS response resolving the endpoint.
    Dns,
    /// No name known; the endpoint's IP address.
    Ip,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Sni => "sni",
            DomainKind::Dns => "dns",
            DomainKind::Ip => "ip",
        }
    }

    pub fn is_hostname(self) -> bool {
        !matches!(self, DomainKind::Ip)
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainKind {
    type Err = DomainLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sni" => Ok(DomainKind::Sni),
            "dns" => Ok(DomainKind::Dns),
            "ip" => Ok(DomainKind::Ip),
            other => Err(DomainLabelError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainLabelError {
    #[error("unknown domain kind `{0}` (expected `sni`, `dns` or `ip`)")]
    UnknownKind(String),
    #[error("`{0}` is not an IP address but its kind is `ip`")]
    NotAnIp(String),
    #[error("`{0}` is an IP address but its kind is `{1}`")]
    UnexpectedIp(String, DomainKind),
    #[error("empty domain label")]
    Empty,
}

/// The server a stream was exchanged with, as named by SNI, DNS, or its IP.
///
/// The value is shared so that cloning a label into every packet sequence of
/// a stream stays cheap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawDomainLabel", into = "RawDomainLabel")]
pub struct DomainLabel {
    value: Arc<str>,
    kind: DomainKind,
}

impl DomainLabel {
    /// Builds a label, checking that `kind` is `Ip` exactly when `value`
    /// parses as an IP address. Hostnames are lowercased and a trailing dot
    /// is removed.
    pub fn new(value: &str, kind: DomainKind) -> Result<Self, DomainLabelError> {
        let trimmed = value.trim();
        if trimmed.is_empty() {
            return Err(DomainLabelError::Empty);
        }
        match (kind, trimmed.parse::<IpAddr>()) {
            (DomainKind::Ip, Ok(ip)) => Ok(Self::ip(ip)),
            (DomainKind::Ip, Err(_)) => Err(DomainLabelError::NotAnIp(trimmed.to_string())),
            (k, Ok(_)) => Err(DomainLabelError::UnexpectedIp(trimmed.to_string(), k)),
            (k, Err(_)) => {
                let host = normalize_hostname(trimmed);
                if host.is_empty() {
                    return Err(DomainLabelError::Empty);
                }
                Ok(Self {
                    value: host.into(),
                    kind: k,
                })
            }
        }
    }

    pub fn ip(addr: IpAddr) -> Self {
        Self {
            value: addr.to_string().into(),
            kind: DomainKind::Ip,
        }
    }

    pub fn sni(host: &str) -> Result<Self, DomainLabelError> {
        Self::new(host, DomainKind::Sni)
    }

    pub fn dns(host: &str) -> Result<Self, DomainLabelError> {
        Self::new(host, DomainKind::Dns)
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    /// The hostname, unless this label is an IP address.
    pub fn hostname(&self) -> Option<&str> {
        self.kind.is_hostname().then_some(&*self.value)
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.value)
    }
}

pub(crate) fn normalize_hostname(host: &str) -> String {
    host.trim_end_matches('.').to_ascii_lowercase()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomainLabel {
    value: String,
    kind: DomainKind,
}

impl TryFrom<RawDomainLabel> for DomainLabel {
    type Error = DomainLabelError;

    fn try_from(raw: RawDomainLabel) -> Result<Self, Self::Error> {
        DomainLabel::new(&raw.value, raw.kind)
    }
}

impl From<DomainLabel> for RawDomainLabel {
    fn from(label: DomainLabel) -> Self {
        RawDomainLabel {
            value: label.value.to_string(),
            kind: label.kind,
        }
    }
}
