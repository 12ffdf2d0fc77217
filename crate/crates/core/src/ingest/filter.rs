//! Restricting a capture to the datagrams exchanged by the fingerprinted device.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use log::warn;
use thiserror::Error;

use super::capture::RawCapture;
use super::decode::decode_frame;

const DNS_PORT: u16 = 53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    /// Device traffic with Internet hosts, as seen outside the home router.
    Wan,
    /// Device traffic with other hosts on the local network.
    Lan,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FilterPolicyError {
    #[error("device address {0} is not in a private address range")]
    NotPrivate(IpAddr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterPolicy {
    device_address: IpAddr,
    scope: Scope,
    dns_exempt: bool,
}

impl FilterPolicy {
    pub fn new(device_address: IpAddr, scope: Scope, dns_exempt: bool) -> Result<Self, FilterPolicyError> {
        if !is_private(device_address) {
            return Err(FilterPolicyError::NotPrivate(device_address));
        }
        Ok(FilterPolicy {
            device_address,
            scope,
            dns_exempt,
        })
    }

    /// WAN scope without the DNS exemption.
    pub fn wan(device_address: IpAddr) -> Result<Self, FilterPolicyError> {
        Self::new(device_address, Scope::Wan, false)
    }

    pub fn device_address(&self) -> IpAddr {
        self.device_address
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn dns_exempt(&self) -> bool {
        self.dns_exempt
    }

    fn peer_allowed(&self, peer: IpAddr) -> bool {
        match self.scope {
            Scope::Wan => is_public(peer),
            Scope::Lan => is_private(peer),
        }
    }
}

fn mapped_v4(ip: Ipv6Addr) -> Option<Ipv4Addr> {
    ip.to_ipv4_mapped()
}

/// RFC 1918, loopback and link-local ranges (IPv6: unique-local, loopback,
/// link-local).
pub fn is_private(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v4) => v4.is_private() || v4.is_loopback() || v4.is_link_local(),
        IpAddr::V6(v6) => {
            if let Some(v4) = mapped_v4(v6) {
                return is_private(IpAddr::V4(v4));
            }
            let seg0 = v6.segments()[0];
            v6.is_loopback() || (seg0 & 0xfe00) == 0xfc00 || (seg0 & 0xffc0) == 0xfe80
        }
    }
}

/// A unicast address that is neither private nor special-purpose
/// (unspecified, broadcast, multicast).
pub fn is_public(ip: IpAddr) -> bool {
    if is_private(ip) {
        return false;
    }
    match ip {
        IpAddr::V4(v4) => !(v4.is_unspecified() || v4.is_broadcast() || v4.is_multicast()),
        IpAddr::V6(v6) => match mapped_v4(v6) {
            Some(v4) => is_public(IpAddr::V4(v4)),
            None => !(v6.is_unspecified() || v6.is_multicast()),
        },
    }
}

/// Result of filtering one capture.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub capture: RawCapture,
    /// Frames whose headers could not be decoded.
    pub malformed: usize,
}

/// Keeps only the datagrams between the device and peers allowed by the
/// policy's scope, plus DNS traffic of the device when the policy exempts it.
pub fn filter_sample(raw: &RawCapture, policy: &FilterPolicy) -> FilterReport {
    let device = policy.device_address;
    let mut malformed = 0;
    let mut kept = Vec::new();
    for p in &raw.packets {
        let d = match decode_frame(p.linktype, &p.data) {
            Ok(d) => d,
            Err(e) => {
                if e.is_malformed() {
                    malformed += 1;
                }
                continue;
            }
        };
        let peer = if d.src == device {
            d.dst
        } else if d.dst == device {
            d.src
        } else {
            continue;
        };
        let is_dns = d
            .ports()
            .is_some_and(|(s, t)| s == DNS_PORT || t == DNS_PORT);
        if policy.peer_allowed(peer) || (policy.dns_exempt && is_dns) {
            kept.push(p.clone());
        }
    }
    if malformed > 0 {
        warn!("skipped {malformed} malformed packet(s)");
    }
    FilterReport {
        capture: RawCapture { packets: kept },
        malformed,
    }
}
