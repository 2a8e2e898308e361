use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::IpAddr;

use chrono::{DateTime, SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{subnet_key, ClusterClass, ClusterIp, FilterPolicy, LocationCluster};
use crate::enrichment::{Cidr, PrefixTable};
use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;

pub const CLUSTER_COLUMNS: [&str; 9] = [
    "device_id",
    "t_start",
    "t_end",
    "lat",
    "lon",
    "accuracy_m",
    "cluster_class",
    "ip",
    "bump_count",
];

const CHUNK_ROWS: usize = 32_768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Malformed,
    Accuracy,
    Precision,
    SpecialUse,
    ForeignRegistry,
    OutOfRegion,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Malformed => "malformed",
            RejectReason::Accuracy => "accuracy",
            RejectReason::Precision => "precision",
            RejectReason::SpecialUse => "special_use",
            RejectReason::ForeignRegistry => "foreign_registry",
            RejectReason::OutOfRegion => "out_of_region",
        }
    }
}

/// Per-reason rejection counts. Merging is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionTally {
    pub total: u64,
    pub accepted: u64,
    pub rejected: BTreeMap<RejectReason, u64>,
    /// Special-use rejections by range name.
    pub special_use: BTreeMap<String, u64>,
    /// Foreign-registry rejections by registry.
    pub foreign_registry: BTreeMap<String, u64>,
}

impl RejectionTally {
    pub fn merge(&mut self, other: &RejectionTally) {
        self.total += other.total;
        self.accepted += other.accepted;
        for (k, v) in &other.rejected {
            *self.rejected.entry(*k).or_default() += v;
        }
        for (k, v) in &other.special_use {
            *self.special_use.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.foreign_registry {
            *self.foreign_registry.entry(k.clone()).or_default() += v;
        }
    }

    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }

    /// Accepted plus rejected equals rows seen.
    pub fn balanced(&self) -> bool {
        self.accepted + self.rejected_total() == self.total
    }

    fn reject(&mut self, reason: RejectReason) {
        *self.rejected.entry(reason).or_default() += 1;
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutput {
    pub clusters: Vec<LocationCluster>,
    pub tally: RejectionTally,
}

fn decimals(field: &str) -> u8 {
    field
        .trim()
        .split_once('.')
        .map_or(0, |(_, frac)| frac.chars().take_while(char::is_ascii_digit).count().min(255) as u8)
}

fn parse_ip(field: &str) -> Option<ClusterIp> {
    let field = field.trim();
    if let Some((addr, len)) = field.split_once('/') {
        let addr: IpAddr = addr.parse().ok()?;
        let want = if addr.is_ipv4() { "24" } else { "48" };
        if len != want {
            return None;
        }
        let net = Cidr::new(addr, len.parse().ok()?).ok()?;
        return Some(ClusterIp { addr: net.addr(), truncated: true });
    }
    if let Ok(addr) = field.parse::<IpAddr>() {
        return Some(ClusterIp::full(addr));
    }
    // three-octet form "a.b.c"
    let parts: Vec<&str> = field.split('.').collect();
    if parts.len() == 3 {
        let addr: IpAddr = format!("{field}.0").parse().ok()?;
        return Some(ClusterIp { addr, truncated: true });
    }
    None
}

fn parse_time(field: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(field.trim()).ok().map(|t| t.with_timezone(&Utc))
}

struct Columns([usize; 9]);

impl Columns {
    fn from_header(header: &csv::StringRecord, source: &str) -> Result<Self> {
        let mut idx = [0usize; 9];
        for (slot, name) in idx.iter_mut().zip(CLUSTER_COLUMNS) {
            *slot = header
                .iter()
                .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
                .ok_or_else(|| Error::Header {
                    source_name: source.to_string(),
                    detail: format!("missing column {name:?}"),
                })?;
        }
        Ok(Columns(idx))
    }
}

fn parse_row(row: &csv::StringRecord, cols: &Columns) -> Option<LocationCluster> {
    let f = |i: usize| row.get(cols.0[i]);
    let device_id = f(0)?.trim();
    if device_id.is_empty() {
        return None;
    }
    let t_start = parse_time(f(1)?)?;
    let t_end = parse_time(f(2)?)?;
    let (lat_s, lon_s) = (f(3)?, f(4)?);
    let position = GeoPoint::new(lat_s.trim().parse().ok()?, lon_s.trim().parse().ok()?);
    let accuracy_m: f64 = f(5)?.trim().parse().ok()?;
    let class: ClusterClass = f(6)?.parse().ok()?;
    let ip = parse_ip(f(7)?)?;
    let bump_count: u32 = f(8)?.trim().parse().ok()?;
    if !position.is_valid() || t_end < t_start || !(accuracy_m >= 0.0) || bump_count == 0 {
        return None;
    }
    Some(LocationCluster {
        device_id: device_id.to_string(),
        t_start,
        t_end,
        position,
        accuracy_m,
        coord_decimals: decimals(lat_s).min(decimals(lon_s)),
        class,
        ip,
        bump_count,
    })
}

fn apply_policy(
    c: &LocationCluster,
    policy: &FilterPolicy,
    nic: Option<&PrefixTable<String>>,
    tally: &mut RejectionTally,
) -> bool {
    if c.accuracy_m > policy.max_accuracy_m {
        tally.reject(RejectReason::Accuracy);
        return false;
    }
    if c.coord_decimals < policy.min_coord_decimals {
        tally.reject(RejectReason::Precision);
        return false;
    }
    if policy.exclude_special_use {
        if let Err(special) = subnet_key(c.ip.addr) {
            tally.reject(RejectReason::SpecialUse);
            *tally.special_use.entry(special.name.to_string()).or_default() += 1;
            return false;
        }
    }
    if policy.exclude_foreign_registry {
        if let Some((_, registry)) = nic.and_then(|t| t.lookup(c.ip.addr)) {
            if !registry.eq_ignore_ascii_case(&policy.home_registry) {
                tally.reject(RejectReason::ForeignRegistry);
                *tally.foreign_registry.entry(registry.to_uppercase()).or_default() += 1;
                return false;
            }
        }
    }
    if !policy.regions.is_empty() && !policy.regions.iter().any(|r| r.contains(c.position)) {
        tally.reject(RejectReason::OutOfRegion);
        return false;
    }
    true
}

fn process_chunk(
    rows: &[csv::StringRecord],
    cols: &Columns,
    policy: &FilterPolicy,
    nic: Option<&PrefixTable<String>>,
) -> ParseOutput {
    let mut out = ParseOutput::default();
    for row in rows {
        out.tally.total += 1;
        match parse_row(row, cols) {
            None => out.tally.reject(RejectReason::Malformed),
            Some(c) => {
                if apply_policy(&c, policy, nic, &mut out.tally) {
                    out.tally.accepted += 1;
                    out.clusters.push(c);
                }
            }
        }
    }
    out
}

/// Reads a delimited cluster file, applying the filter policy.
///
/// Malformed rows are tallied rather than fatal; only an unreadable header
/// aborts. Rows are processed in parallel chunks on the current rayon pool
/// and reassembled in input order.
pub fn parse_clusters<R: Read>(
    input: R,
    source_name: &str,
    policy: &FilterPolicy,
    nic: Option<&PrefixTable<String>>,
) -> Result<ParseOutput> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = reader.headers().map_err(|e| Error::Header {
        source_name: source_name.to_string(),
        detail: e.to_string(),
    })?;
    let cols = Columns::from_header(header, source_name)?;

    let mut rows = Vec::new();
    let mut unreadable = 0u64;
    for row in reader.records() {
        match row {
            Ok(r) => rows.push(r),
            // invalid UTF-8 and similar: count and move on
            Err(_) => unreadable += 1,
        }
    }

    let parts: Vec<ParseOutput> = rows
        .par_chunks(CHUNK_ROWS)
        .map(|chunk| process_chunk(chunk, &cols, policy, nic))
        .collect();
    let mut out = ParseOutput::default();
    out.tally.total = unreadable;
    if unreadable > 0 {
        out.tally.rejected.insert(RejectReason::Malformed, unreadable);
    }
    out.clusters.reserve(parts.iter().map(|p| p.clusters.len()).sum());
    for part in parts {
        out.tally.merge(&part.tally);
        out.clusters.extend(part.clusters);
    }
    Ok(out)
}

/// Writes clusters in the input format, keeping each record's coordinate
/// precision so that re-parsing applies the same cuts.
pub fn write_clusters<W: Write>(out: W, clusters: &[LocationCluster]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CLUSTER_COLUMNS)?;
    for c in clusters {
        let prec = c.coord_decimals as usize;
        w.write_record([
            c.device_id.clone(),
            c.t_start.to_rfc3339_opts(SecondsFormat::Secs, true),
            c.t_end.to_rfc3339_opts(SecondsFormat::Secs, true),
            format!("{:.*}", prec, c.position.lat),
            format!("{:.*}", prec, c.position.lon),
            format!("{}", c.accuracy_m),
            c.class.as_str().to_string(),
            c.ip.to_string(),
            c.bump_count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<cluster writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CityRegion;

    const HEADER: &str = "device_id,t_start,t_end,lat,lon,accuracy_m,cluster_class,ip,bump_count\n";

    fn chicago_policy() -> FilterPolicy {
        FilterPolicy {
            regions: vec![CityRegion::new("Chicago", GeoPoint::new(41.8781, -87.6298))],
            ..FilterPolicy::default()
        }
    }

    fn parse(body: &str, policy: &FilterPolicy) -> ParseOutput {
        parse_clusters(format!("{HEADER}{body}").as_bytes(), "test", policy, None).unwrap()
    }

    #[test]
    fn accuracy_cut() {
        let out = parse(
            "d1,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.878100,-87.629800,60,AREA_DWELL,67.176.158.201,3\n",
            &chicago_policy(),
        );
        assert!(out.clusters.is_empty());
        assert_eq!(out.tally.rejected[&RejectReason::Accuracy], 1);
    }

    #[test]
    fn precision_cut() {
        let out = parse(
            "d1,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.8781,-87.629800,10,AREA_DWELL,67.176.158.201,3\n",
            &chicago_policy(),
        );
        assert_eq!(out.tally.rejected[&RejectReason::Precision], 1);
    }

    #[test]
    fn clean_row_is_accepted() {
        let out = parse(
            "d1,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.878100,-87.629800,0,AREA_DWELL,67.176.158.201,3\n",
            &chicago_policy(),
        );
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.clusters[0].coord_decimals, 6);
        assert!(out.tally.balanced());
    }

    #[test]
    fn every_reason_is_tallied() {
        let nic = PrefixTable::build([("5.0.0.0/8".parse::<Cidr>().unwrap(), "RIPE".to_string())]).unwrap();
        let body = "\
d1,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.878100,-87.629800,5,AREA_DWELL,10.0.0.1,1
d1,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.878100,-87.629800,5,AREA_DWELL,5.1.2.3,1
d1,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,34.052200,-118.243700,5,AREA_DWELL,67.1.2.3,1
d1,not-a-time,2020-08-01T04:00:00Z,41.878100,-87.629800,5,AREA_DWELL,67.1.2.3,1
d1,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.878100
d1,2020-08-01T05:00:00Z,2020-08-01T04:00:00Z,41.878100,-87.629800,5,AREA_DWELL,67.1.2.3,1
d2,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.878100,-87.629800,5,TRAVEL,67.1.2,1
";
        let out = parse_clusters(format!("{HEADER}{body}").as_bytes(), "t", &chicago_policy(), Some(&nic)).unwrap();
        let t = &out.tally;
        assert_eq!(t.total, 7);
        assert_eq!(t.accepted, 1);
        assert_eq!(t.rejected[&RejectReason::SpecialUse], 1);
        assert_eq!(t.rejected[&RejectReason::ForeignRegistry], 1);
        assert_eq!(t.rejected[&RejectReason::OutOfRegion], 1);
        assert_eq!(t.rejected[&RejectReason::Malformed], 3);
        assert_eq!(t.special_use["private-use"], 1);
        assert_eq!(t.foreign_registry["RIPE"], 1);
        assert!(t.balanced());
        let truncated = &out.clusters[0];
        assert!(truncated.ip.truncated);
        assert_eq!(truncated.ip.to_string(), "67.1.2.0/24");
    }

    #[test]
    fn missing_column_is_fatal() {
        let err = parse_clusters("device_id,lat\n".as_bytes(), "bad.csv", &FilterPolicy::default(), None).unwrap_err();
        assert!(matches!(err, Error::Header { .. }));
        assert!(err.is_config());
    }

    #[test]
    fn filtering_is_idempotent() {
        let body = "\
a,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.878100,-87.629800,5,AREA_DWELL,67.1.2.3,1
b,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.87810,-87.62980,50,PING,67.1.2.4,2
c,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.8781,-87.6298,5,PING,67.1.2.5,2
d,2020-08-01T03:00:00Z,2020-08-01T04:00:00Z,41.900000,-87.700000,5,TRAVEL,67.1.2.0/24,2
";
        let policy = chicago_policy();
        let first = parse(body, &policy);
        let mut buf = Vec::new();
        write_clusters(&mut buf, &first.clusters).unwrap();
        let second = parse_clusters(buf.as_slice(), "again", &policy, None).unwrap();
        assert_eq!(second.tally.rejected_total(), 0);
        assert_eq!(second.clusters, first.clusters);
    }
}
