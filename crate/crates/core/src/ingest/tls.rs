//! Server Name Indication extraction from a TLS Client Hello.

use std::net::IpAddr;

const CONTENT_HANDSHAKE: u8 = 0x16;
const HANDSHAKE_CLIENT_HELLO: u8 = 0x01;
const EXT_SERVER_NAME: u16 = 0x0000;
const NAME_TYPE_HOST: u8 = 0x00;

/// Outcome of inspecting the initial client bytes of a stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SniScan {
    /// A complete Client Hello was parsed; the SNI host name, if any.
    Done(Option<String>),
    /// Looks like a Client Hello but more bytes are needed.
    NeedMore,
    /// Not a TLS handshake, or a malformed one.
    NotTls,
}

/// Strips TLS record headers, concatenating handshake-record fragments.
fn handshake_bytes(data: &[u8]) -> Result<(Vec<u8>, bool), ()> {
    let mut out = Vec::new();
    let mut off = 0;
    while off < data.len() {
        if data.len() - off < 5 {
            return Ok((out, false));
        }
        if data[off] != CONTENT_HANDSHAKE || data[off + 1] != 0x03 {
            return Err(());
        }
        let len = usize::from(u16::from_be_bytes([data[off + 3], data[off + 4]]));
        if len == 0 {
            return Err(());
        }
        let body_start = off + 5;
        let avail = (data.len() - body_start).min(len);
        out.extend_from_slice(&data[body_start..body_start + avail]);
        if avail < len {
            return Ok((out, false));
        }
        off = body_start + len;
    }
    Ok((out, true))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_be_bytes([b[0], b[1]]))
    }

    fn vec8(&mut self) -> Option<&'a [u8]> {
        let n = usize::from(self.u8()?);
        self.take(n)
    }

    fn vec16(&mut self) -> Option<&'a [u8]> {
        let n = usize::from(self.u16()?);
        self.take(n)
    }
}

/// Parses a complete Client Hello body (after the 4-byte handshake header).
fn parse_client_hello(body: &[u8]) -> Option<Option<String>> {
    let mut r = Reader { buf: body, pos: 0 };
    r.take(2)?; // legacy version
    r.take(32)?; // random
    r.vec8()?; // session id
    r.vec16()?; // cipher suites
    r.vec8()?; // compression methods
    if r.pos == body.len() {
        return Some(None);
    }
    let exts = r.vec16()?;
    let mut e = Reader { buf: exts, pos: 0 };
    while e.pos < exts.len() {
        let ty = e.u16()?;
        let data = e.vec16()?;
        if ty != EXT_SERVER_NAME {
            continue;
        }
        let mut s = Reader { buf: data, pos: 0 };
        let list = s.vec16()?;
        let mut l = Reader { buf: list, pos: 0 };
        while l.pos < list.len() {
            let name_type = l.u8()?;
            let name = l.vec16()?;
            if name_type == NAME_TYPE_HOST {
                return Some(valid_host(name));
            }
        }
        return Some(None);
    }
    Some(None)
}

fn valid_host(name: &[u8]) -> Option<String> {
    if name.is_empty() || name.len() > 253 {
        return None;
    }
    let s = std::str::from_utf8(name).ok()?;
    if !s
        .bytes()
        .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_'))
    {
        return None;
    }
    let host = s.trim_end_matches('.').to_ascii_lowercase();
    // An SNI must be a host name; an IP literal is treated as absent.
    if host.is_empty() || host.parse::<IpAddr>().is_ok() {
        return None;
    }
    Some(host)
}

/// Inspects the concatenated initial client-to-server payload of a stream.
pub fn scan_client_hello(data: &[u8]) -> SniScan {
    if data.is_empty() {
        return SniScan::NeedMore;
    }
    if data[0] != CONTENT_HANDSHAKE {
        return SniScan::NotTls;
    }
    let Ok((hs, _complete)) = handshake_bytes(data) else {
        return SniScan::NotTls;
    };
    if hs.len() < 4 {
        return SniScan::NeedMore;
    }
    if hs[0] != HANDSHAKE_CLIENT_HELLO {
        return SniScan::NotTls;
    }
    let len = (usize::from(hs[1]) << 16) | (usize::from(hs[2]) << 8) | usize::from(hs[3]);
    if hs.len() < 4 + len {
        return SniScan::NeedMore;
    }
    match parse_client_hello(&hs[4..4 + len]) {
        Some(sni) => SniScan::Done(sni),
        None => SniScan::NotTls,
    }
}

/// SNI host name of a complete Client Hello, or `None` when absent or malformed.
pub fn extract_sni(data: &[u8]) -> Option<String> {
    match scan_client_hello(data) {
        SniScan::Done(sni) => sni,
        _ => None,
    }
}
