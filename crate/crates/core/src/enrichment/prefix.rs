//! Longest-prefix-match lookup over IPv4 and IPv6 CIDR sets.
//!
//! One hash map per prefix length that actually occurs; a lookup probes the
//! lengths longest-first. Memory is linear in the entry count and the probe
//! count is bounded by the number of distinct lengths (at most 33 or 129).

use std::collections::HashMap;
use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A canonical CIDR prefix (host bits zeroed). Serializes as `addr/len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cidr {
    addr: IpAddr,
    len: u8,
}

pub(crate) fn ip_bits(ip: IpAddr) -> (bool, u128) {
    match ip {
        IpAddr::V4(v4) => (false, u32::from(v4) as u128),
        IpAddr::V6(v6) => (true, u128::from(v6)),
    }
}

fn mask_bits(bits: u128, len: u8, width: u8) -> u128 {
    if len == 0 {
        0
    } else {
        let shift = width - len;
        (bits >> shift) << shift
    }
}

impl Cidr {
    pub fn new(addr: IpAddr, len: u8) -> Result<Self> {
        let width = if addr.is_ipv4() { 32 } else { 128 };
        if len > width {
            return Err(Error::Data(format!("prefix length /{len} too long for {addr}")));
        }
        let (v6, bits) = ip_bits(addr);
        let masked = mask_bits(bits, len, width);
        let addr = if v6 {
            IpAddr::V6(Ipv6Addr::from(masked))
        } else {
            IpAddr::V4(Ipv4Addr::from(masked as u32))
        };
        Ok(Cidr { addr, len })
    }

    pub fn addr(&self) -> IpAddr {
        self.addr
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_ipv6(&self) -> bool {
        self.addr.is_ipv6()
    }

    pub fn contains(&self, ip: IpAddr) -> bool {
        if ip.is_ipv6() != self.is_ipv6() {
            return false;
        }
        let width = if ip.is_ipv4() { 32 } else { 128 };
        mask_bits(ip_bits(ip).1, self.len, width) == ip_bits(self.addr).1
    }
}

impl fmt::Display for Cidr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

impl Serialize for Cidr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cidr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for Cidr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (addr, len) = match s.split_once('/') {
            Some((a, l)) => (a, Some(l)),
            None => (s, None),
        };
        let addr: IpAddr = addr
            .parse()
            .map_err(|_| Error::Data(format!("invalid CIDR address {s:?}")))?;
        let len = match len {
            Some(l) => l
                .parse::<u8>()
                .map_err(|_| Error::Data(format!("invalid CIDR length {s:?}")))?,
            None if addr.is_ipv4() => 32,
            None => 128,
        };
        Cidr::new(addr, len)
    }
}

#[derive(Debug, Clone, Default)]
struct FamilyTable {
    // (prefix length, masked network bits -> value index), longest first
    levels: Vec<(u8, HashMap<u128, usize>)>,
}

impl FamilyTable {
    fn lookup(&self, bits: u128, width: u8) -> Option<(u8, usize)> {
        self.levels.iter().find_map(|(len, map)| {
            map.get(&mask_bits(bits, *len, width)).map(|&i| (*len, i))
        })
    }
}

/// Immutable longest-prefix-match table.
#[derive(Debug, Clone)]
pub struct PrefixTable<V> {
    v4: FamilyTable,
    v6: FamilyTable,
    prefixes: Vec<Cidr>,
    values: Vec<V>,
}

impl<V: PartialEq> PrefixTable<V> {
    /// Builds the table. Repeated prefixes with equal values collapse; with
    /// differing values they are reported together as a load error.
    pub fn build(entries: impl IntoIterator<Item = (Cidr, V)>) -> Result<Self> {
        let mut prefixes = Vec::new();
        let mut values: Vec<V> = Vec::new();
        let mut index: HashMap<Cidr, usize> = HashMap::new();
        let mut conflicts: Vec<Cidr> = Vec::new();
        for (cidr, value) in entries {
            match index.get(&cidr) {
                Some(&i) => {
                    if values[i] != value {
                        conflicts.push(cidr);
                    }
                }
                None => {
                    index.insert(cidr, values.len());
                    prefixes.push(cidr);
                    values.push(value);
                }
            }
        }
        if !conflicts.is_empty() {
            conflicts.sort();
            conflicts.dedup();
            return Err(Error::PrefixConflict(conflicts.iter().map(Cidr::to_string).collect()));
        }
        let mut v4: HashMap<u8, HashMap<u128, usize>> = HashMap::new();
        let mut v6: HashMap<u8, HashMap<u128, usize>> = HashMap::new();
        for (i, cidr) in prefixes.iter().enumerate() {
            let (is_v6, bits) = ip_bits(cidr.addr);
            let fam = if is_v6 { &mut v6 } else { &mut v4 };
            fam.entry(cidr.len).or_default().insert(bits, i);
        }
        let finish = |m: HashMap<u8, HashMap<u128, usize>>| {
            let mut levels: Vec<_> = m.into_iter().collect();
            levels.sort_by(|a, b| b.0.cmp(&a.0));
            FamilyTable { levels }
        };
        Ok(PrefixTable {
            v4: finish(v4),
            v6: finish(v6),
            prefixes,
            values,
        })
    }
}

impl<V> PrefixTable<V> {
    pub fn lookup(&self, ip: IpAddr) -> Option<(Cidr, &V)> {
        let (is_v6, bits) = ip_bits(ip);
        let hit = if is_v6 {
            self.v6.lookup(bits, 128)
        } else {
            self.v4.lookup(bits, 32)
        };
        hit.map(|(_, i)| (self.prefixes[i], &self.values[i]))
    }

    pub fn get_exact(&self, cidr: &Cidr) -> Option<&V> {
        let (is_v6, bits) = ip_bits(cidr.addr);
        let fam = if is_v6 { &self.v6 } else { &self.v4 };
        fam.levels
            .iter()
            .find(|(len, _)| *len == cidr.len)
            .and_then(|(_, m)| m.get(&bits))
            .map(|&i| &self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Cidr, &V)> {
        self.prefixes.iter().zip(self.values.iter())
    }
}
