//! From raw packet captures to labelled TCP payload streams.

pub mod capture;
pub mod craft;
pub mod decode;
pub mod dns;
pub mod domain;
pub mod filter;
pub mod split;
pub mod streams;
pub mod tls;

pub use capture::{read_capture, write_pcap, CaptureError, RawCapture, RawPacket, Timestamp};
pub use dns::{DnsLog, DnsLogEntry};
pub use domain::{Direction, DomainKind, DomainLabel, DomainLabelError};
pub use filter::{filter_sample, FilterPolicy, FilterReport, Scope};
pub use split::{read_event_timestamps, split_by_events, SplitError};
pub use streams::{assemble_streams, collect_dns, resolve_domain, StreamPacket, TcpStreamRecord};

/// Streams of one traffic sample, with domains resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessed {
    pub streams: Vec<TcpStreamRecord>,
    pub dns: DnsLog,
    pub malformed: usize,
}

/// Filters a capture, assembles its streams and labels each with a domain.
pub fn preprocess(raw: &RawCapture, policy: &FilterPolicy) -> Preprocessed {
    let FilterReport { capture, malformed } = filter_sample(raw, policy);
    let dns = collect_dns(&capture);
    let mut streams = assemble_streams(&capture, policy.device_address());
    for s in &mut streams {
        s.domain = resolve_domain(s, s.sni.as_deref(), &dns);
    }
    Preprocessed { streams, dns, malformed }
}
