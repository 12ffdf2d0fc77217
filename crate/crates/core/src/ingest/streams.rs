//! TCP stream assembly and domain resolution.

use std::collections::{HashMap, HashSet};
use std::net::IpAddr;

use super::capture::{RawCapture, Timestamp};
use super::decode::{decode_frame, TCP_ACK, TCP_FIN, TCP_RST, TCP_SYN};
use super::dns::{parse_dns_response, parse_dns_tcp_payload, DnsLog, DnsLogEntry};
use super::domain::{Direction, DomainLabel};
use super::tls::{scan_client_hello, SniScan};

/// How many upstream data segments are inspected for a Client Hello.
const SNI_SEGMENTS: usize = 8;
const DNS_PORT: u16 = 53;

/// One payload-carrying packet of a stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamPacket {
    /// 1-based position within the stream.
    pub position: u32,
    /// IP datagram length in bytes.
    pub size: u32,
    pub direction: Direction,
    pub timestamp: Timestamp,
    /// Index of the frame in the capture the stream was assembled from.
    pub frame_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcpStreamRecord {
    pub stream_id: u32,
    pub endpoint_ip: IpAddr,
    pub endpoint_port: u16,
    pub domain: DomainLabel,
    /// Host name from the stream's TLS Client Hello, if one was seen.
    pub sni: Option<String>,
    pub packets: Vec<StreamPacket>,
}

impl TcpStreamRecord {
    pub fn first_timestamp(&self) -> Option<Timestamp> {
        self.packets.first().map(|p| p.timestamp)
    }
}

type Endpoint = (IpAddr, u16);

fn flow_key(a: Endpoint, b: Endpoint) -> (Endpoint, Endpoint) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

struct Building {
    endpoint: Endpoint,
    closed: bool,
    packets: Vec<StreamPacket>,
    seen: HashSet<(Direction, u32, u32)>,
    hello: Vec<u8>,
    hello_segments: usize,
    sni: Option<SniScan>,
}

/// Groups the device's TCP packets into streams.
///
/// Zero-payload segments and retransmissions (an earlier accepted segment of
/// the same stream and direction with equal sequence number and payload
/// length) are dropped. A SYN on a 4-tuple whose connection was closed by FIN
/// or RST starts a new stream. Stream ids are assigned in order of first
/// appearance; streams left without packets are omitted, so ids may have gaps.
pub fn assemble_streams(filtered: &RawCapture, device: IpAddr) -> Vec<TcpStreamRecord> {
    let mut order: Vec<usize> = (0..filtered.packets.len()).collect();
    order.sort_by_key(|&i| filtered.packets[i].timestamp);

    let mut current: HashMap<(Endpoint, Endpoint), usize> = HashMap::new();
    let mut streams: Vec<Building> = Vec::new();

    for i in order {
        let raw = &filtered.packets[i];
        let Ok(d) = decode_frame(raw.linktype, &raw.data) else {
            continue;
        };
        let Some(tcp) = d.tcp() else { continue };
        let direction = if d.src == device {
            Direction::Upstream
        } else if d.dst == device {
            Direction::Downstream
        } else {
            continue;
        };
        let src = (d.src, tcp.src_port);
        let dst = (d.dst, tcp.dst_port);
        let key = flow_key(src, dst);
        let fresh_syn = tcp.has(TCP_SYN) && !tcp.has(TCP_ACK);
        let idx = match current.get(&key) {
            Some(&idx) if !(fresh_syn && streams[idx].closed) => idx,
            _ => {
                streams.push(Building {
                    endpoint: if direction == Direction::Upstream { dst } else { src },
                    closed: false,
                    packets: Vec::new(),
                    seen: HashSet::new(),
                    hello: Vec::new(),
                    hello_segments: 0,
                    sni: None,
                });
                current.insert(key, streams.len() - 1);
                streams.len() - 1
            }
        };
        let s = &mut streams[idx];
        if tcp.has(TCP_FIN) || tcp.has(TCP_RST) {
            s.closed = true;
        }
        if tcp.payload_len == 0 || !s.seen.insert((direction, tcp.seq, tcp.payload_len)) {
            continue;
        }
        if direction == Direction::Upstream && s.sni.is_none() {
            s.hello.extend_from_slice(&raw.data[tcp.payload.clone()]);
            s.hello_segments += 1;
            match scan_client_hello(&s.hello) {
                SniScan::NeedMore if s.hello_segments < SNI_SEGMENTS => {}
                scan => {
                    s.sni = Some(scan);
                    s.hello = Vec::new();
                }
            }
        }
        s.packets.push(StreamPacket {
            position: s.packets.len() as u32 + 1,
            size: d.ip_len,
            direction,
            timestamp: raw.timestamp,
            frame_index: i,
        });
    }

    streams
        .into_iter()
        .enumerate()
        .filter(|(_, s)| !s.packets.is_empty())
        .map(|(id, s)| TcpStreamRecord {
            stream_id: id as u32,
            endpoint_ip: s.endpoint.0,
            endpoint_port: s.endpoint.1,
            domain: DomainLabel::ip(s.endpoint.0),
            sni: match s.sni {
                Some(SniScan::Done(host)) => host,
                _ => None,
            },
            packets: s.packets,
        })
        .collect()
}

/// Chooses the stream's domain label: the SNI if observed, else the name of
/// the most recent DNS response (at or before the stream's first packet) that
/// resolved the endpoint, else the endpoint IP.
pub fn resolve_domain(stream: &TcpStreamRecord, sni_observed: Option<&str>, dns: &DnsLog) -> DomainLabel {
    if let Some(label) = sni_observed.and_then(|h| DomainLabel::sni(h).ok()) {
        return label;
    }
    if let Some(at) = stream.first_timestamp() {
        if let Some(label) = dns
            .most_recent_name(stream.endpoint_ip, at)
            .and_then(|name| DomainLabel::dns(name).ok())
        {
            return label;
        }
    }
    DomainLabel::ip(stream.endpoint_ip)
}

/// Collects DNS responses (UDP, or TCP with a complete message per segment)
/// carried in a capture.
pub fn collect_dns(capture: &RawCapture) -> DnsLog {
    let mut entries = Vec::new();
    for p in &capture.packets {
        let Ok(d) = decode_frame(p.linktype, &p.data) else {
            continue;
        };
        let parsed = if let Some(u) = d.udp() {
            (u.src_port == DNS_PORT).then(|| parse_dns_response(&p.data[u.payload.clone()]))
        } else if let Some(t) = d.tcp() {
            (t.src_port == DNS_PORT && t.payload_len > 0).then(|| parse_dns_tcp_payload(&p.data[t.payload.clone()]))
        } else {
            None
        };
        if let Some(Some(r)) = parsed {
            if !r.resolved_ips.is_empty() {
                entries.push(DnsLogEntry {
                    timestamp: p.timestamp,
                    queried_name: r.queried_name,
                    resolved_ips: r.resolved_ips,
                });
            }
        }
    }
    DnsLog::new(entries)
}
