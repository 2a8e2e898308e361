use std::fmt;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::enrichment::Cidr;

/// Aggregation unit: the /24 of an IPv4 address or the /48 of an IPv6 one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubnetKey(Cidr);

impl SubnetKey {
    pub fn network(&self) -> Cidr {
        self.0
    }

    pub fn is_ipv6(&self) -> bool {
        self.0.is_ipv6()
    }
}

impl fmt::Display for SubnetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An address inside an IANA special-purpose or otherwise non-public range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialUse {
    pub range: &'static str,
    pub name: &'static str,
}

impl fmt::Display for SpecialUse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name, self.range)
    }
}

const V4_SPECIAL: &[(u32, u8, &str, &str)] = &[
    (0x0000_0000, 8, "0.0.0.0/8", "this-network"),
    (0x0A00_0000, 8, "10.0.0.0/8", "private-use"),
    (0x6440_0000, 10, "100.64.0.0/10", "shared-address"),
    (0x7F00_0000, 8, "127.0.0.0/8", "loopback"),
    (0xA9FE_0000, 16, "169.254.0.0/16", "link-local"),
    (0xAC10_0000, 12, "172.16.0.0/12", "private-use"),
    (0xC000_0000, 24, "192.0.0.0/24", "ietf-protocol"),
    (0xC000_0200, 24, "192.0.2.0/24", "documentation"),
    (0xC058_6300, 24, "192.88.99.0/24", "6to4-relay"),
    (0xC0A8_0000, 16, "192.168.0.0/16", "private-use"),
    (0xC612_0000, 15, "198.18.0.0/15", "benchmarking"),
    (0xC633_6400, 24, "198.51.100.0/24", "documentation"),
    (0xCB00_7100, 24, "203.0.113.0/24", "documentation"),
    (0xE000_0000, 4, "224.0.0.0/4", "multicast"),
    (0xF000_0000, 4, "240.0.0.0/4", "reserved"),
];

const V6_SPECIAL: &[(u128, u8, &str, &str)] = &[
    (0, 128, "::/128", "unspecified"),
    (1, 128, "::1/128", "loopback"),
    (0xffff_0000_0000, 96, "::ffff:0:0/96", "ipv4-mapped"),
    (0x0100_0000_0000_0000 << 64, 64, "100::/64", "discard-only"),
    (0xfc00 << 112, 7, "fc00::/7", "unique-local"),
    (0xfe80 << 112, 10, "fe80::/10", "link-local"),
    (0xff00 << 112, 8, "ff00::/8", "multicast"),
];

/// The special-use range containing `ip`, if any.
///
/// IPv6 space outside 2000::/3 (global unicast) is reported as reserved.
pub fn special_use_range(ip: IpAddr) -> Option<SpecialUse> {
    match ip {
        IpAddr::V4(v4) => {
            let bits = u32::from(v4);
            V4_SPECIAL.iter().find_map(|&(net, len, range, name)| {
                let mask = if len == 0 { 0 } else { u32::MAX << (32 - len) };
                (bits & mask == net).then_some(SpecialUse { range, name })
            })
        }
        IpAddr::V6(v6) => {
            let bits = u128::from(v6);
            let listed = V6_SPECIAL.iter().find_map(|&(net, len, range, name)| {
                let mask = if len == 0 { 0 } else { u128::MAX << (128 - len) };
                (bits & mask == net).then_some(SpecialUse { range, name })
            });
            listed.or_else(|| {
                (bits >> 125 != 0b001).then_some(SpecialUse { range: "!2000::/3", name: "reserved" })
            })
        }
    }
}

/// The canonical /24 or /48 network of a public address.
pub fn subnet_key(ip: IpAddr) -> Result<SubnetKey, SpecialUse> {
    if let Some(s) = special_use_range(ip) {
        return Err(s);
    }
    let len = if ip.is_ipv4() { 24 } else { 48 };
    Ok(SubnetKey(Cidr::new(ip, len).expect("length fits the family")))
}
