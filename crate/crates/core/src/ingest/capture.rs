//! Raw packet captures: timestamps, PCAP / PCAP-NG reading and PCAP writing.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use thiserror::Error;

const NANOS_PER_SEC: i64 = 1_000_000_000;

/// Capture timestamp with nanosecond resolution, counted from the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_nanos(nanos: i64) -> Self {
        Timestamp(nanos)
    }

    pub fn from_secs(secs: i64) -> Self {
        Timestamp(secs * NANOS_PER_SEC)
    }

    /// Rounds to the nearest nanosecond.
    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs * NANOS_PER_SEC as f64).round() as i64)
    }

    pub const fn as_nanos(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }

    pub fn saturating_add_nanos(self, nanos: i64) -> Self {
        Timestamp(self.0.saturating_add(nanos))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(
            f,
            "{sign}{}.{:09}",
            abs / NANOS_PER_SEC as u64,
            abs % NANOS_PER_SEC as u64
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid timestamp `{0}`")]
pub struct ParseTimestampError(pub String);

/// Parses decimal epoch seconds exactly, e.g. `1520553725.348109`.
/// Digits beyond nanosecond precision are truncated.
impl FromStr for Timestamp {
    type Err = ParseTimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseTimestampError(s.to_string());
        let t = s.trim();
        let (negative, digits) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        let secs: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| err())?
        };
        let mut frac: i64 = 0;
        for (i, b) in frac_part.bytes().take(9).enumerate() {
            frac += i64::from(b - b'0') * 10i64.pow(8 - i as u32);
        }
        let nanos = secs
            .checked_mul(NANOS_PER_SEC)
            .and_then(|n| n.checked_add(frac))
            .ok_or_else(err)?;
        Ok(Timestamp(if negative { -nanos } else { nanos }))
    }
}

/// One captured frame as read from a capture file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPacket {
    pub timestamp: Timestamp,
    /// Link-layer header type (tcpdump `LINKTYPE_*` value).
    pub linktype: u32,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

/// An ordered list of captured frames.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawCapture {
    pub packets: Vec<RawPacket>,
}

impl RawCapture {
    /// Builds a capture, stably sorting packets by timestamp so that ties keep
    /// file order.
    pub fn new(mut packets: Vec<RawPacket>) -> Self {
        packets.sort_by_key(|p| p.timestamp);
        RawCapture { packets }
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a PCAP or PCAP-NG file (magic {0:#010x})")]
    UnknownFormat(u32),
    #[error("capture file is too short to hold a header")]
    TooShort,
    #[error("malformed PCAP-NG block at offset {0}")]
    BadBlock(usize),
    #[error("packets have differing link types ({0} and {1}); cannot write a single PCAP file")]
    MixedLinkTypes(u32, u32),
}

pub const LINKTYPE_ETHERNET: u32 = 1;

/// Reads a PCAP or PCAP-NG file.
pub fn read_capture(path: &Path) -> Result<RawCapture, CaptureError> {
    let bytes = fs::read(path)?;
    parse_capture(&bytes)
}

/// Parses PCAP (either byte order, micro- or nanosecond) or PCAP-NG bytes.
///
/// A truncated trailing record ends the capture with a warning instead of
/// failing the whole file.
pub fn parse_capture(bytes: &[u8]) -> Result<RawCapture, CaptureError> {
    if bytes.len() < 4 {
        return Err(CaptureError::TooShort);
    }
    let magic = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    match magic {
        0xa1b2c3d4 => parse_pcap(bytes, Endian::Little, 1_000),
        0xd4c3b2a1 => parse_pcap(bytes, Endian::Big, 1_000),
        0xa1b23c4d => parse_pcap(bytes, Endian::Little, 1),
        0x4d3cb2a1 => parse_pcap(bytes, Endian::Big, 1),
        0x0a0d0d0a => parse_pcapng(bytes),
        other => Err(CaptureError::UnknownFormat(other)),
    }
}

#[derive(Clone, Copy, Debug)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u16(self, b: &[u8]) -> u16 {
        let a = [b[0], b[1]];
        match self {
            Endian::Little => u16::from_le_bytes(a),
            Endian::Big => u16::from_be_bytes(a),
        }
    }

    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self {
            Endian::Little => u32::from_le_bytes(a),
            Endian::Big => u32::from_be_bytes(a),
        }
    }
}

fn parse_pcap(bytes: &[u8], endian: Endian, nanos_per_unit: i64) -> Result<RawCapture, CaptureError> {
    if bytes.len() < 24 {
        return Err(CaptureError::TooShort);
    }
    let linktype = endian.u32(&bytes[20..24]) & 0x0fff_ffff;
    let mut packets = Vec::new();
    let mut off = 24;
    while off < bytes.len() {
        if off + 16 > bytes.len() {
            warn!("truncated PCAP record header at offset {off}; ignoring the rest of the file");
            break;
        }
        let hdr = &bytes[off..off + 16];
        let ts_sec = i64::from(endian.u32(&hdr[0..4]));
        let ts_frac = i64::from(endian.u32(&hdr[4..8]));
        let incl = endian.u32(&hdr[8..12]) as usize;
        let orig_len = endian.u32(&hdr[12..16]);
        let start = off + 16;
        if start + incl > bytes.len() {
            warn!("truncated PCAP record at offset {off}; ignoring the rest of the file");
            break;
        }
        packets.push(RawPacket {
            timestamp: Timestamp(ts_sec * NANOS_PER_SEC + ts_frac * nanos_per_unit),
            linktype,
            orig_len,
            data: bytes[start..start + incl].to_vec(),
        });
        off = start + incl;
    }
    Ok(RawCapture::new(packets))
}

#[derive(Clone, Copy)]
struct Interface {
    linktype: u32,
    /// Timestamp units per second.
    units_per_sec: u128,
    offset_secs: i64,
}

fn parse_pcapng(bytes: &[u8]) -> Result<RawCapture, CaptureError> {
    let mut endian = Endian::Little;
    let mut interfaces: Vec<Interface> = Vec::new();
    let mut packets = Vec::new();
    let mut last_ts = Timestamp::default();
    let mut off = 0usize;

    while off < bytes.len() {
        if off + 12 > bytes.len() {
            warn!("truncated PCAP-NG block at offset {off}; ignoring the rest of the file");
            break;
        }
        let block_type = u32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]);
        if block_type == 0x0a0d0d0a {
            // Section header: byte-order magic decides the endianness of the section.
            let bom = &bytes[off + 8..off + 12];
            endian = match u32::from_le_bytes([bom[0], bom[1], bom[2], bom[3]]) {
                0x1a2b3c4d => Endian::Little,
                0x4d3c2b1a => Endian::Big,
                _ => return Err(CaptureError::BadBlock(off)),
            };
            interfaces.clear();
        }
        let total_len = endian.u32(&bytes[off + 4..off + 8]) as usize;
        if total_len < 12 || !total_len.is_multiple_of(4) {
            return Err(CaptureError::BadBlock(off));
        }
        if off + total_len > bytes.len() {
            warn!("truncated PCAP-NG block at offset {off}; ignoring the rest of the file");
            break;
        }
        let body = &bytes[off + 8..off + total_len - 4];
        match endian.u32(&bytes[off..off + 4]) {
            // Interface description
            1 => {
                if body.len() < 8 {
                    return Err(CaptureError::BadBlock(off));
                }
                let mut iface = Interface {
                    linktype: u32::from(endian.u16(&body[0..2])),
                    units_per_sec: 1_000_000,
                    offset_secs: 0,
                };
                for (code, value) in pcapng_options(&body[8..], endian) {
                    match code {
                        9 if !value.is_empty() => {
                            let v = value[0];
                            iface.units_per_sec = if v & 0x80 == 0 {
                                10u128.pow(u32::from(v))
                            } else {
                                1u128 << (v & 0x7f)
                            };
                        }
                        14 if value.len() >= 8 => {
                            let raw = match endian {
                                Endian::Little => i64::from_le_bytes(value[..8].try_into().unwrap()),
                                Endian::Big => i64::from_be_bytes(value[..8].try_into().unwrap()),
                            };
                            iface.offset_secs = raw;
                        }
                        _ => {}
                    }
                }
                interfaces.push(iface);
            }
            // Enhanced packet
            6 => {
                if body.len() < 20 {
                    return Err(CaptureError::BadBlock(off));
                }
                let if_id = endian.u32(&body[0..4]) as usize;
                let ts = (u64::from(endian.u32(&body[4..8])) << 32) | u64::from(endian.u32(&body[8..12]));
                let caplen = endian.u32(&body[12..16]) as usize;
                let orig_len = endian.u32(&body[16..20]);
                let Some(iface) = interfaces.get(if_id).copied() else {
                    warn!("enhanced packet block references unknown interface {if_id}; skipped");
                    off += total_len;
                    continue;
                };
                if 20 + caplen > body.len() {
                    return Err(CaptureError::BadBlock(off));
                }
                let nanos = (u128::from(ts) * 1_000_000_000 / iface.units_per_sec) as i64
                    + iface.offset_secs * NANOS_PER_SEC;
                last_ts = Timestamp(nanos);
                packets.push(RawPacket {
                    timestamp: last_ts,
                    linktype: iface.linktype,
                    orig_len,
                    data: body[20..20 + caplen].to_vec(),
                });
            }
            // Simple packet: no timestamp, inherits the previous one.
            3 => {
                if body.len() < 4 {
                    return Err(CaptureError::BadBlock(off));
                }
                let Some(iface) = interfaces.first().copied() else {
                    warn!("simple packet block before any interface description; skipped");
                    off += total_len;
                    continue;
                };
                let orig_len = endian.u32(&body[0..4]);
                let caplen = (orig_len as usize).min(body.len() - 4);
                packets.push(RawPacket {
                    timestamp: last_ts,
                    linktype: iface.linktype,
                    orig_len,
                    data: body[4..4 + caplen].to_vec(),
                });
            }
            _ => {}
        }
        off += total_len;
    }
    Ok(RawCapture::new(packets))
}

fn pcapng_options(mut opts: &[u8], endian: Endian) -> Vec<(u16, &[u8])> {
    let mut out = Vec::new();
    while opts.len() >= 4 {
        let code = endian.u16(&opts[0..2]);
        let len = endian.u16(&opts[2..4]) as usize;
        if code == 0 || 4 + len > opts.len() {
            break;
        }
        out.push((code, &opts[4..4 + len]));
        let padded = (len + 3) & !3;
        opts = &opts[(4 + padded).min(opts.len())..];
    }
    out
}

/// Serializes a capture as a little-endian, nanosecond-resolution PCAP file.
pub fn encode_pcap(capture: &RawCapture) -> Result<Vec<u8>, CaptureError> {
    let linktype = match capture.packets.first() {
        Some(p) => p.linktype,
        None => LINKTYPE_ETHERNET,
    };
    if let Some(other) = capture.packets.iter().find(|p| p.linktype != linktype) {
        return Err(CaptureError::MixedLinkTypes(linktype, other.linktype));
    }
    let snaplen = capture
        .packets
        .iter()
        .map(|p| p.data.len() as u32)
        .max()
        .unwrap_or(0)
        .max(65535);
    let mut out = Vec::with_capacity(24 + capture.packets.iter().map(|p| 16 + p.data.len()).sum::<usize>());
    out.extend_from_slice(&0xa1b23c4du32.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0i32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&snaplen.to_le_bytes());
    out.extend_from_slice(&linktype.to_le_bytes());
    for p in &capture.packets {
        let nanos = p.timestamp.as_nanos();
        out.extend_from_slice(&(nanos.div_euclid(NANOS_PER_SEC) as u32).to_le_bytes());
        out.extend_from_slice(&(nanos.rem_euclid(NANOS_PER_SEC) as u32).to_le_bytes());
        out.extend_from_slice(&(p.data.len() as u32).to_le_bytes());
        out.extend_from_slice(&p.orig_len.to_le_bytes());
        out.extend_from_slice(&p.data);
    }
    Ok(out)
}

/// Writes a capture as PCAP, atomically replacing `path`.
pub fn write_pcap(path: &Path, capture: &RawCapture) -> Result<(), CaptureError> {
    let bytes = encode_pcap(capture)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
