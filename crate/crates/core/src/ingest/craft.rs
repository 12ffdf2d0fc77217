//! Packet construction helpers for synthetic captures and tests.
//!
//! Frames are built with minimal, valid headers (checksums are left zero;
//! nothing in the pipeline verifies them).

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr, SocketAddr};

use super::capture::{RawPacket, Timestamp, LINKTYPE_ETHERNET};
use super::decode::{TCP_ACK, TCP_FIN, TCP_RST, TCP_SYN};

pub const IPV4_TCP_OVERHEAD: u32 = 40;

#[derive(Debug, Clone)]
pub struct TcpSpec {
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
    pub flags: u8,
    pub payload: Vec<u8>,
}

fn tcp_header(spec: &TcpSpec) -> Vec<u8> {
    let mut t = Vec::with_capacity(20 + spec.payload.len());
    t.extend_from_slice(&spec.src_port.to_be_bytes());
    t.extend_from_slice(&spec.dst_port.to_be_bytes());
    t.extend_from_slice(&spec.seq.to_be_bytes());
    t.extend_from_slice(&0u32.to_be_bytes());
    t.push(5 << 4);
    t.push(spec.flags);
    t.extend_from_slice(&65535u16.to_be_bytes());
    t.extend_from_slice(&[0, 0, 0, 0]);
    t.extend_from_slice(&spec.payload);
    t
}

fn udp_datagram(src_port: u16, dst_port: u16, payload: &[u8]) -> Vec<u8> {
    let mut u = Vec::with_capacity(8 + payload.len());
    u.extend_from_slice(&src_port.to_be_bytes());
    u.extend_from_slice(&dst_port.to_be_bytes());
    u.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
    u.extend_from_slice(&[0, 0]);
    u.extend_from_slice(payload);
    u
}

fn ipv4(src: Ipv4Addr, dst: Ipv4Addr, proto: u8, l4: &[u8]) -> Vec<u8> {
    let mut ip = Vec::with_capacity(20 + l4.len());
    ip.push(0x45);
    ip.push(0);
    ip.extend_from_slice(&((20 + l4.len()) as u16).to_be_bytes());
    ip.extend_from_slice(&[0, 0, 0x40, 0]);
    ip.push(64);
    ip.push(proto);
    ip.extend_from_slice(&[0, 0]);
    ip.extend_from_slice(&src.octets());
    ip.extend_from_slice(&dst.octets());
    ip.extend_from_slice(l4);
    ip
}

fn ipv6(src: Ipv6Addr, dst: Ipv6Addr, proto: u8, l4: &[u8]) -> Vec<u8> {
    let mut ip = Vec::with_capacity(40 + l4.len());
    ip.extend_from_slice(&[0x60, 0, 0, 0]);
    ip.extend_from_slice(&(l4.len() as u16).to_be_bytes());
    ip.push(proto);
    ip.push(64);
    ip.extend_from_slice(&src.octets());
    ip.extend_from_slice(&dst.octets());
    ip.extend_from_slice(l4);
    ip
}

pub fn ipv4_tcp(src: [u8; 4], dst: [u8; 4], spec: &TcpSpec) -> Vec<u8> {
    ipv4(src.into(), dst.into(), 6, &tcp_header(spec))
}

pub fn ipv6_tcp(src: Ipv6Addr, dst: Ipv6Addr, spec: &TcpSpec) -> Vec<u8> {
    ipv6(src, dst, 6, &tcp_header(spec))
}

pub fn ipv4_udp(src: [u8; 4], dst: [u8; 4], src_port: u16, dst_port: u16, payload: &[u8]) -> Vec<u8> {
    ipv4(src.into(), dst.into(), 17, &udp_datagram(src_port, dst_port, payload))
}

/// An IP datagram carrying TCP; the address families of `src` and `dst` must agree.
pub fn ip_tcp(src: IpAddr, dst: IpAddr, spec: &TcpSpec) -> Vec<u8> {
    match (src, dst) {
        (IpAddr::V4(s), IpAddr::V4(d)) => ipv4(s, d, 6, &tcp_header(spec)),
        (IpAddr::V6(s), IpAddr::V6(d)) => ipv6(s, d, 6, &tcp_header(spec)),
        _ => panic!("mixed address families"),
    }
}

pub fn ip_udp(src: IpAddr, dst: IpAddr, src_port: u16, dst_port: u16, payload: &[u8]) -> Vec<u8> {
    let l4 = udp_datagram(src_port, dst_port, payload);
    match (src, dst) {
        (IpAddr::V4(s), IpAddr::V4(d)) => ipv4(s, d, 17, &l4),
        (IpAddr::V6(s), IpAddr::V6(d)) => ipv6(s, d, 17, &l4),
        _ => panic!("mixed address families"),
    }
}

/// Wraps an IP datagram in an Ethernet II header.
pub fn ethernet_frame(ip: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(14 + ip.len());
    f.extend_from_slice(&[0x02, 0, 0, 0, 0, 1, 0x02, 0, 0, 0, 0, 2]);
    let ethertype: u16 = if ip.first().map(|b| b >> 4) == Some(6) { 0x86dd } else { 0x0800 };
    f.extend_from_slice(&ethertype.to_be_bytes());
    f.extend_from_slice(ip);
    f
}

pub fn ethernet_packet(timestamp: Timestamp, ip: &[u8]) -> RawPacket {
    let data = ethernet_frame(ip);
    RawPacket {
        timestamp,
        linktype: LINKTYPE_ETHERNET,
        orig_len: data.len() as u32,
        data,
    }
}

fn encode_name(name: &str, out: &mut Vec<u8>) {
    for label in name.trim_end_matches('.').split('.').filter(|l| !l.is_empty()) {
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
    out.push(0);
}

/// Resource data of a DNS answer record.
#[derive(Debug, Clone)]
pub enum DnsData {
    A(Ipv4Addr),
    Aaaa(Ipv6Addr),
    Cname(String),
}

#[derive(Debug, Clone)]
pub struct DnsAnswer {
    pub name: String,
    pub data: DnsData,
}

/// Builds a DNS response message. Answers owned by the queried name use a
/// compression pointer to the question, as real resolvers do.
pub fn dns_response(id: u16, qname: &str, answers: &[DnsAnswer]) -> Vec<u8> {
    let mut m = Vec::new();
    m.extend_from_slice(&id.to_be_bytes());
    m.extend_from_slice(&0x8180u16.to_be_bytes());
    m.extend_from_slice(&1u16.to_be_bytes());
    m.extend_from_slice(&(answers.len() as u16).to_be_bytes());
    m.extend_from_slice(&[0, 0, 0, 0]);
    encode_name(qname, &mut m);
    m.extend_from_slice(&1u16.to_be_bytes());
    m.extend_from_slice(&1u16.to_be_bytes());
    for a in answers {
        if a.name.eq_ignore_ascii_case(qname) {
            m.extend_from_slice(&[0xc0, 0x0c]);
        } else {
            encode_name(&a.name, &mut m);
        }
        let (rtype, rdata) = match &a.data {
            DnsData::A(ip) => (1u16, ip.octets().to_vec()),
            DnsData::Aaaa(ip) => (28u16, ip.octets().to_vec()),
            DnsData::Cname(target) => {
                let mut r = Vec::new();
                encode_name(target, &mut r);
                (5u16, r)
            }
        };
        m.extend_from_slice(&rtype.to_be_bytes());
        m.extend_from_slice(&1u16.to_be_bytes());
        m.extend_from_slice(&300u32.to_be_bytes());
        m.extend_from_slice(&(rdata.len() as u16).to_be_bytes());
        m.extend_from_slice(&rdata);
    }
    m
}

/// Builds a DNS query message for an A record.
pub fn dns_query(id: u16, qname: &str) -> Vec<u8> {
    let mut m = Vec::new();
    m.extend_from_slice(&id.to_be_bytes());
    m.extend_from_slice(&0x0100u16.to_be_bytes());
    m.extend_from_slice(&1u16.to_be_bytes());
    m.extend_from_slice(&[0, 0, 0, 0, 0, 0]);
    encode_name(qname, &mut m);
    m.extend_from_slice(&1u16.to_be_bytes());
    m.extend_from_slice(&1u16.to_be_bytes());
    m
}

/// Builds a TLS 1.2-style record holding a Client Hello, optionally with an
/// SNI extension.
pub fn tls_client_hello(sni: Option<&str>) -> Vec<u8> {
    let mut body = Vec::new();
    body.extend_from_slice(&[0x03, 0x03]);
    body.extend_from_slice(&[0x42; 32]);
    body.push(0);
    body.extend_from_slice(&4u16.to_be_bytes());
    body.extend_from_slice(&[0x13, 0x01, 0xc0, 0x2f]);
    body.extend_from_slice(&[1, 0]);
    let mut exts = Vec::new();
    // supported_groups, ahead of server_name to exercise extension skipping
    exts.extend_from_slice(&[0x00, 0x0a, 0x00, 0x04, 0x00, 0x02, 0x00, 0x1d]);
    if let Some(host) = sni {
        let h = host.as_bytes();
        exts.extend_from_slice(&0u16.to_be_bytes());
        exts.extend_from_slice(&((h.len() + 5) as u16).to_be_bytes());
        exts.extend_from_slice(&((h.len() + 3) as u16).to_be_bytes());
        exts.push(0);
        exts.extend_from_slice(&(h.len() as u16).to_be_bytes());
        exts.extend_from_slice(h);
    }
    body.extend_from_slice(&(exts.len() as u16).to_be_bytes());
    body.extend_from_slice(&exts);

    let mut hs = vec![1];
    hs.extend_from_slice(&(body.len() as u32).to_be_bytes()[1..]);
    hs.extend_from_slice(&body);

    let mut rec = vec![0x16, 0x03, 0x01];
    rec.extend_from_slice(&(hs.len() as u16).to_be_bytes());
    rec.extend_from_slice(&hs);
    rec
}

/// Generates the frames of one TCP connection with consistent sequence numbers.
#[derive(Debug, Clone)]
pub struct TcpConversation {
    client: SocketAddr,
    server: SocketAddr,
    client_seq: u32,
    server_seq: u32,
}

impl TcpConversation {
    pub fn new(client: SocketAddr, server: SocketAddr) -> Self {
        TcpConversation {
            client,
            server,
            client_seq: 1000,
            server_seq: 5000,
        }
    }

    fn packet(&self, t: Timestamp, upstream: bool, seq: u32, flags: u8, payload: Vec<u8>) -> RawPacket {
        let (src, dst) = if upstream {
            (self.client, self.server)
        } else {
            (self.server, self.client)
        };
        let spec = TcpSpec {
            src_port: src.port(),
            dst_port: dst.port(),
            seq,
            flags,
            payload,
        };
        ethernet_packet(t, &ip_tcp(src.ip(), dst.ip(), &spec))
    }

    /// SYN, SYN-ACK and ACK at `t`, `t+1ns`, `t+2ns`.
    pub fn handshake(&mut self, t: Timestamp) -> Vec<RawPacket> {
        let syn = self.packet(t, true, self.client_seq, TCP_SYN, Vec::new());
        let synack = self.packet(t.saturating_add_nanos(1), false, self.server_seq, TCP_SYN | TCP_ACK, Vec::new());
        self.client_seq = self.client_seq.wrapping_add(1);
        self.server_seq = self.server_seq.wrapping_add(1);
        let ack = self.packet(t.saturating_add_nanos(2), true, self.client_seq, TCP_ACK, Vec::new());
        vec![syn, synack, ack]
    }

    /// A data segment carrying `payload`, advancing the sender's sequence number.
    pub fn data(&mut self, t: Timestamp, upstream: bool, payload: Vec<u8>) -> RawPacket {
        let len = payload.len() as u32;
        let seq = if upstream { self.client_seq } else { self.server_seq };
        let p = self.packet(t, upstream, seq, TCP_ACK, payload);
        if upstream {
            self.client_seq = self.client_seq.wrapping_add(len);
        } else {
            self.server_seq = self.server_seq.wrapping_add(len);
        }
        p
    }

    /// A data segment whose IP datagram is exactly `ip_len` bytes.
    pub fn data_sized(&mut self, t: Timestamp, upstream: bool, ip_len: u32) -> RawPacket {
        let overhead = match self.client.ip() {
            IpAddr::V4(_) => IPV4_TCP_OVERHEAD,
            IpAddr::V6(_) => 60,
        };
        assert!(ip_len > overhead, "size must exceed header overhead");
        self.data(t, upstream, vec![0x17; (ip_len - overhead) as usize])
    }

    /// Resends a previous segment unchanged: same sequence number and payload.
    pub fn retransmit(&self, t: Timestamp, original: &RawPacket) -> RawPacket {
        RawPacket {
            timestamp: t,
            ..original.clone()
        }
    }

    /// A pure ACK with no payload.
    pub fn ack(&self, t: Timestamp, upstream: bool) -> RawPacket {
        let seq = if upstream { self.client_seq } else { self.server_seq };
        self.packet(t, upstream, seq, TCP_ACK, Vec::new())
    }

    pub fn fin(&mut self, t: Timestamp, upstream: bool) -> RawPacket {
        let seq = if upstream { self.client_seq } else { self.server_seq };
        let p = self.packet(t, upstream, seq, TCP_FIN | TCP_ACK, Vec::new());
        if upstream {
            self.client_seq = self.client_seq.wrapping_add(1);
        } else {
            self.server_seq = self.server_seq.wrapping_add(1);
        }
        p
    }

    pub fn rst(&self, t: Timestamp, upstream: bool) -> RawPacket {
        let seq = if upstream { self.client_seq } else { self.server_seq };
        self.packet(t, upstream, seq, TCP_RST, Vec::new())
    }
}
