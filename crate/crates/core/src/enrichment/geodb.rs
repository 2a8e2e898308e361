//! Geolocation database snapshots keyed by CIDR.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::{Cidr, PrefixTable};
use crate::error::{Error, Result};
use crate::geodesy::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbEntry {
    pub point: GeoPoint,
    pub accuracy_km: Option<f64>,
}

/// Inclusive range of UTC dates the snapshot is licensed to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotWindow {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl SnapshotWindow {
    pub fn new(from: NaiveDate, to: NaiveDate) -> Result<Self> {
        if from > to {
            return Err(Error::Config(format!("snapshot window {from}..{to} is reversed")));
        }
        Ok(SnapshotWindow { from, to })
    }

    pub fn covers(&self, t: DateTime<Utc>) -> bool {
        let d = t.date_naive();
        self.from <= d && d <= self.to
    }
}

#[derive(Debug)]
pub struct GeoDbSnapshot {
    pub provider: Arc<str>,
    pub snapshot_date: NaiveDate,
    pub window: SnapshotWindow,
    pub table: PrefixTable<DbEntry>,
}

impl GeoDbSnapshot {
    pub fn new(
        provider: &str,
        snapshot_date: NaiveDate,
        window: SnapshotWindow,
        entries: impl IntoIterator<Item = (Cidr, DbEntry)>,
    ) -> Result<Self> {
        Ok(GeoDbSnapshot {
            provider: Arc::from(provider),
            snapshot_date,
            window,
            table: PrefixTable::build(entries)?,
        })
    }

    /// Reads `network,latitude,longitude[,accuracy_km]`; other columns are ignored.
    pub fn from_reader<R: Read>(
        input: R,
        source_name: &str,
        provider: &str,
        snapshot_date: NaiveDate,
        window: SnapshotWindow,
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
        let headers = reader.headers().map_err(|e| Error::Header {
            source_name: source_name.into(),
            detail: e.to_string(),
        })?;
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (net, lat, lon) = match (find("network"), find("latitude"), find("longitude")) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::Header {
                    source_name: source_name.into(),
                    detail: "expected columns network,latitude,longitude".into(),
                })
            }
        };
        let acc = find("accuracy_km");
        let mut entries = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let bad = |what: &str| Error::Data(format!("{source_name} row {}: bad {what}", i + 2));
            let cidr: Cidr = row.get(net).ok_or_else(|| bad("network"))?.trim().parse()?;
            let la: f64 = row.get(lat).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("latitude"))?;
            let lo: f64 = row.get(lon).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("longitude"))?;
            let point = GeoPoint::new(la, lo);
            if !point.is_valid() {
                return Err(bad("coordinates"));
            }
            let accuracy_km = match acc.and_then(|c| row.get(c)).map(str::trim) {
                None | Some("") => None,
                Some(s) => Some(s.parse::<f64>().map_err(|_| bad("accuracy_km"))?),
            };
            entries.push((cidr, DbEntry { point, accuracy_km }));
        }
        Self::new(provider, snapshot_date, window, entries)
    }

    pub fn load(path: &Path, provider: &str, snapshot_date: NaiveDate, window: SnapshotWindow) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string(), provider, snapshot_date, window)
    }
}
