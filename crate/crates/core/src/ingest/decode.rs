//! Link, network and transport header decoding.
//!
//! Supports Ethernet (with 802.1Q/802.1ad tags), raw IP, Linux cooked
//! capture v1/v2 and BSD loopback framing. IPv6 extension headers are walked
//! up to the transport header.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::ops::Range;

use thiserror::Error;

const LINKTYPE_NULL: u32 = 0;
const LINKTYPE_ETHERNET: u32 = 1;
const LINKTYPE_RAW_ALT: u32 = 12;
const LINKTYPE_RAW: u32 = 101;
const LINKTYPE_LOOP: u32 = 108;
const LINKTYPE_LINUX_SLL: u32 = 113;
const LINKTYPE_IPV4: u32 = 228;
const LINKTYPE_IPV6: u32 = 229;
const LINKTYPE_LINUX_SLL2: u32 = 276;

pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

pub const TCP_FIN: u8 = 0x01;
pub const TCP_SYN: u8 = 0x02;
pub const TCP_RST: u8 = 0x04;
pub const TCP_ACK: u8 = 0x10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unsupported link type {0}")]
    UnsupportedLinkType(u32),
    #[error("truncated {0} header")]
    Truncated(&'static str),
    #[error("not an IP packet")]
    NotIp,
    #[error("bad IP header: {0}")]
    BadIp(&'static str),
    #[error("bad TCP header")]
    BadTcp,
}

impl DecodeError {
    /// Packets that are simply not IP (ARP, LLDP, ...) are not malformed.
    pub fn is_malformed(&self) -> bool {
        !matches!(self, DecodeError::NotIp | DecodeError::UnsupportedLinkType(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcpSegment {
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
    pub flags: u8,
    /// Payload length according to the IP and TCP headers.
    pub payload_len: u32,
    /// Captured payload bytes (may be shorter than `payload_len` under a snap length).
    pub payload: Range<usize>,
}

impl TcpSegment {
    pub fn has(&self, flag: u8) -> bool {
        self.flags & flag != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UdpDatagram {
    pub src_port: u16,
    pub dst_port: u16,
    pub payload: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    Tcp(TcpSegment),
    Udp(UdpDatagram),
    /// Another IP protocol, or a non-first fragment.
    Other(u8),
}

/// Decoded headers of one frame. Ranges index into the frame bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedPacket {
    pub src: IpAddr,
    pub dst: IpAddr,
    /// Total IP datagram length in bytes, from the IP header.
    pub ip_len: u32,
    pub transport: Transport,
}

impl DecodedPacket {
    pub fn tcp(&self) -> Option<&TcpSegment> {
        match &self.transport {
            Transport::Tcp(t) => Some(t),
            _ => None,
        }
    }

    pub fn udp(&self) -> Option<&UdpDatagram> {
        match &self.transport {
            Transport::Udp(u) => Some(u),
            _ => None,
        }
    }

    /// Source and destination ports for TCP and UDP.
    pub fn ports(&self) -> Option<(u16, u16)> {
        match &self.transport {
            Transport::Tcp(t) => Some((t.src_port, t.dst_port)),
            Transport::Udp(u) => Some((u.src_port, u.dst_port)),
            Transport::Other(_) => None,
        }
    }
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

fn be32(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Returns the offset of the IP header within the frame.
fn link_offset(linktype: u32, frame: &[u8]) -> Result<usize, DecodeError> {
    match linktype {
        LINKTYPE_ETHERNET => {
            if frame.len() < 14 {
                return Err(DecodeError::Truncated("ethernet"));
            }
            let mut off = 12;
            let mut ethertype = be16(frame, off);
            while ethertype == 0x8100 || ethertype == 0x88a8 || ethertype == 0x9100 {
                off += 4;
                if frame.len() < off + 2 {
                    return Err(DecodeError::Truncated("vlan"));
                }
                ethertype = be16(frame, off);
            }
            match ethertype {
                0x0800 | 0x86dd => Ok(off + 2),
                _ => Err(DecodeError::NotIp),
            }
        }
        LINKTYPE_RAW | LINKTYPE_RAW_ALT | LINKTYPE_IPV4 | LINKTYPE_IPV6 => Ok(0),
        LINKTYPE_LINUX_SLL => {
            if frame.len() < 16 {
                return Err(DecodeError::Truncated("linux cooked"));
            }
            match be16(frame, 14) {
                0x0800 | 0x86dd => Ok(16),
                _ => Err(DecodeError::NotIp),
            }
        }
        LINKTYPE_LINUX_SLL2 => {
            if frame.len() < 20 {
                return Err(DecodeError::Truncated("linux cooked v2"));
            }
            match be16(frame, 0) {
                0x0800 | 0x86dd => Ok(20),
                _ => Err(DecodeError::NotIp),
            }
        }
        LINKTYPE_NULL | LINKTYPE_LOOP => {
            if frame.len() < 4 {
                return Err(DecodeError::Truncated("loopback"));
            }
            // The family is host-endian for NULL and network-endian for LOOP;
            // accept either reading.
            let le = u32::from_le_bytes([frame[0], frame[1], frame[2], frame[3]]);
            let be = be32(frame, 0);
            let is_ip = |af: u32| matches!(af, 2 | 10 | 24 | 28 | 30);
            if is_ip(le) || is_ip(be) {
                Ok(4)
            } else {
                Err(DecodeError::NotIp)
            }
        }
        other => Err(DecodeError::UnsupportedLinkType(other)),
    }
}

/// Decodes the IP and transport headers of a captured frame.
pub fn decode_frame(linktype: u32, frame: &[u8]) -> Result<DecodedPacket, DecodeError> {
    let ip_off = link_offset(linktype, frame)?;
    decode_ip(frame, ip_off)
}

fn decode_ip(frame: &[u8], off: usize) -> Result<DecodedPacket, DecodeError> {
    let ip = frame.get(off..).ok_or(DecodeError::Truncated("ip"))?;
    let version = ip.first().ok_or(DecodeError::Truncated("ip"))? >> 4;
    match version {
        4 => decode_ipv4(frame, off),
        6 => decode_ipv6(frame, off),
        _ => Err(DecodeError::BadIp("unknown version")),
    }
}

fn decode_ipv4(frame: &[u8], off: usize) -> Result<DecodedPacket, DecodeError> {
    let ip = &frame[off..];
    if ip.len() < 20 {
        return Err(DecodeError::Truncated("ipv4"));
    }
    let ihl = usize::from(ip[0] & 0x0f) * 4;
    if ihl < 20 || ip.len() < ihl {
        return Err(DecodeError::BadIp("header length"));
    }
    let total_len = be16(ip, 2);
    if usize::from(total_len) < ihl {
        return Err(DecodeError::BadIp("total length"));
    }
    let frag = be16(ip, 6);
    let frag_offset = frag & 0x1fff;
    let proto = ip[9];
    let src = IpAddr::V4(Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]));
    let dst = IpAddr::V4(Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]));
    let transport = if frag_offset != 0 {
        Transport::Other(proto)
    } else {
        let l4_end = (off + usize::from(total_len)).min(frame.len());
        let l4_len = u32::from(total_len) - ihl as u32;
        decode_transport(frame, off + ihl, l4_end, l4_len, proto)?
    };
    Ok(DecodedPacket {
        src,
        dst,
        ip_len: u32::from(total_len),
        transport,
    })
}

fn decode_ipv6(frame: &[u8], off: usize) -> Result<DecodedPacket, DecodeError> {
    let ip = &frame[off..];
    if ip.len() < 40 {
        return Err(DecodeError::Truncated("ipv6"));
    }
    let payload_len = u32::from(be16(ip, 4));
    let mut next = ip[6];
    let src = IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&ip[8..24]).unwrap()));
    let dst = IpAddr::V6(Ipv6Addr::from(<[u8; 16]>::try_from(&ip[24..40]).unwrap()));
    let ip_end = (off + 40 + payload_len as usize).min(frame.len());
    let mut cursor = off + 40;
    let mut remaining = payload_len;
    let mut fragmented_tail = false;
    loop {
        match next {
            // hop-by-hop, routing, destination options
            0 | 43 | 60 => {
                if cursor + 2 > ip_end {
                    return Err(DecodeError::Truncated("ipv6 extension"));
                }
                let len = (usize::from(frame[cursor + 1]) + 1) * 8;
                next = frame[cursor];
                cursor += len;
                remaining = remaining.checked_sub(len as u32).ok_or(DecodeError::BadIp("extension length"))?;
            }
            44 => {
                if cursor + 8 > ip_end {
                    return Err(DecodeError::Truncated("ipv6 fragment"));
                }
                let frag_offset = be16(frame, cursor + 2) >> 3;
                fragmented_tail = frag_offset != 0;
                next = frame[cursor];
                cursor += 8;
                remaining = remaining.checked_sub(8).ok_or(DecodeError::BadIp("fragment length"))?;
            }
            _ => break,
        }
    }
    let transport = if fragmented_tail {
        Transport::Other(next)
    } else {
        decode_transport(frame, cursor, ip_end, remaining, next)?
    };
    Ok(DecodedPacket {
        src,
        dst,
        ip_len: 40 + payload_len,
        transport,
    })
}

/// `start..end` is the captured transport slice; `l4_len` its length per the IP header.
fn decode_transport(
    frame: &[u8],
    start: usize,
    end: usize,
    l4_len: u32,
    proto: u8,
) -> Result<Transport, DecodeError> {
    match proto {
        PROTO_TCP => {
            if end < start + 20 {
                return Err(DecodeError::Truncated("tcp"));
            }
            let t = &frame[start..end];
            let data_off = usize::from(t[12] >> 4) * 4;
            if data_off < 20 || data_off as u32 > l4_len {
                return Err(DecodeError::BadTcp);
            }
            let payload_start = (start + data_off).min(end);
            Ok(Transport::Tcp(TcpSegment {
                src_port: be16(t, 0),
                dst_port: be16(t, 2),
                seq: be32(t, 4),
                flags: t[13],
                payload_len: l4_len - data_off as u32,
                payload: payload_start..end,
            }))
        }
        PROTO_UDP => {
            if end < start + 8 {
                return Err(DecodeError::Truncated("udp"));
            }
            Ok(Transport::Udp(UdpDatagram {
                src_port: be16(frame, start),
                dst_port: be16(frame, start + 2),
                payload: start + 8..end,
            }))
        }
        other => Ok(Transport::Other(other)),
    }
}
