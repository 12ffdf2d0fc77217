//! DNS response parsing and the time-ordered log of name resolutions.

use std::collections::{BTreeSet, HashMap};
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use super::capture::Timestamp;
use super::domain::normalize_hostname;

const TYPE_A: u16 = 1;
const TYPE_CNAME: u16 = 5;
const TYPE_AAAA: u16 = 28;
const CLASS_IN: u16 = 1;

/// A parsed DNS response: the queried name and the addresses it resolved to,
/// following CNAME chains from the question name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnsResolution {
    pub queried_name: String,
    pub resolved_ips: BTreeSet<IpAddr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnsLogEntry {
    pub timestamp: Timestamp,
    pub queried_name: String,
    pub resolved_ips: BTreeSet<IpAddr>,
}

/// Time-ordered DNS resolutions observed in a capture.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DnsLog {
    entries: Vec<DnsLogEntry>,
}

impl DnsLog {
    pub fn new(mut entries: Vec<DnsLogEntry>) -> Self {
        entries.sort_by_key(|e| e.timestamp);
        DnsLog { entries }
    }

    pub fn entries(&self) -> &[DnsLogEntry] {
        &self.entries
    }

    pub fn push(&mut self, entry: DnsLogEntry) {
        let at = self.entries.partition_point(|e| e.timestamp <= entry.timestamp);
        self.entries.insert(at, entry);
    }

    /// Name queried in the most recent response at or before `at` that
    /// resolved to `ip`.
    pub fn most_recent_name(&self, ip: IpAddr, at: Timestamp) -> Option<&str> {
        let end = self.entries.partition_point(|e| e.timestamp <= at);
        self.entries[..end]
            .iter()
            .rev()
            .find(|e| e.resolved_ips.contains(&ip))
            .map(|e| e.queried_name.as_str())
    }
}

struct Msg<'a> {
    buf: &'a [u8],
}

impl<'a> Msg<'a> {
    fn u16(&self, at: usize) -> Option<u16> {
        Some(u16::from_be_bytes([*self.buf.get(at)?, *self.buf.get(at + 1)?]))
    }

    /// Reads a possibly compressed name at `at`; returns it and the offset
    /// just past its in-place encoding.
    fn name(&self, at: usize) -> Option<(String, usize)> {
        let mut labels: Vec<String> = Vec::new();
        let mut pos = at;
        let mut end = None;
        let mut jumps = 0;
        loop {
            let len = *self.buf.get(pos)?;
            match len & 0xc0 {
                0x00 => {
                    if len == 0 {
                        end.get_or_insert(pos + 1);
                        break;
                    }
                    let l = self.buf.get(pos + 1..pos + 1 + usize::from(len))?;
                    labels.push(String::from_utf8_lossy(l).into_owned());
                    pos += 1 + usize::from(len);
                }
                0xc0 => {
                    let target = usize::from(self.u16(pos)? & 0x3fff);
                    end.get_or_insert(pos + 2);
                    jumps += 1;
                    if jumps > 32 {
                        return None;
                    }
                    pos = target;
                }
                _ => return None,
            }
        }
        Some((normalize_hostname(&labels.join(".")), end?))
    }
}

/// Parses a DNS message; returns `None` unless it is a well-formed response
/// with a question.
pub fn parse_dns_response(buf: &[u8]) -> Option<DnsResolution> {
    let m = Msg { buf };
    let flags = m.u16(2)?;
    if flags & 0x8000 == 0 {
        return None;
    }
    let qdcount = m.u16(4)?;
    let ancount = m.u16(6)?;
    if qdcount == 0 {
        return None;
    }
    let mut pos = 12;
    let mut qname = None;
    for _ in 0..qdcount {
        let (name, next) = m.name(pos)?;
        qname.get_or_insert(name);
        pos = next + 4;
    }
    let qname = qname?;

    let mut cnames: HashMap<String, String> = HashMap::new();
    let mut addrs: Vec<(String, IpAddr)> = Vec::new();
    for _ in 0..ancount {
        let (owner, next) = m.name(pos)?;
        let rtype = m.u16(next)?;
        let class = m.u16(next + 2)?;
        let rdlen = usize::from(m.u16(next + 8)?);
        let rdata_at = next + 10;
        let rdata = buf.get(rdata_at..rdata_at + rdlen)?;
        if class == CLASS_IN {
            match rtype {
                TYPE_A if rdlen == 4 => {
                    addrs.push((owner, IpAddr::V4(Ipv4Addr::new(rdata[0], rdata[1], rdata[2], rdata[3]))));
                }
                TYPE_AAAA if rdlen == 16 => {
                    let octets: [u8; 16] = rdata.try_into().ok()?;
                    addrs.push((owner, IpAddr::V6(Ipv6Addr::from(octets))));
                }
                TYPE_CNAME => {
                    let (target, _) = m.name(rdata_at)?;
                    cnames.insert(owner, target);
                }
                _ => {}
            }
        }
        pos = rdata_at + rdlen;
    }

    // Names reachable from the question through CNAMEs.
    let mut chain = vec![qname.clone()];
    while let Some(next) = cnames.get(chain.last().unwrap()) {
        if chain.contains(next) {
            break;
        }
        chain.push(next.clone());
    }
    let resolved_ips = addrs
        .into_iter()
        .filter(|(owner, _)| chain.contains(owner))
        .map(|(_, ip)| ip)
        .collect();
    Some(DnsResolution {
        queried_name: qname,
        resolved_ips,
    })
}

/// Parses a DNS-over-TCP segment payload (two-byte length prefix). Only a
/// message that is complete within the segment is recognized.
pub fn parse_dns_tcp_payload(buf: &[u8]) -> Option<DnsResolution> {
    if buf.len() < 2 {
        return None;
    }
    let len = usize::from(u16::from_be_bytes([buf[0], buf[1]]));
    parse_dns_response(buf.get(2..2 + len)?)
}
