use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::LocationCluster;

const DAY: i64 = 86_400;
const NIGHT_END: i64 = 6 * 3_600;

/// Fixed offset of the study region's civil time from UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UtcOffset {
    seconds: i32,
}

impl UtcOffset {
    pub fn from_hours(hours: i32) -> Self {
        UtcOffset { seconds: hours * 3_600 }
    }

    pub fn from_seconds(seconds: i32) -> Self {
        UtcOffset { seconds }
    }

    pub fn seconds(&self) -> i32 {
        self.seconds
    }

    pub fn local_seconds(&self, t: DateTime<Utc>) -> i64 {
        t.timestamp() + self.seconds as i64
    }

    /// Local calendar day number (days since 1970-01-01 local).
    pub fn local_day(&self, t: DateTime<Utc>) -> i64 {
        self.local_seconds(t).div_euclid(DAY)
    }
}

impl fmt::Display for UtcOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.seconds < 0 { '-' } else { '+' };
        let abs = self.seconds.unsigned_abs();
        write!(f, "{sign}{:02}:{:02}", abs / 3600, (abs % 3600) / 60)
    }
}

impl FromStr for UtcOffset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let bad = || format!("invalid UTC offset {s:?}, expected e.g. \"-05:00\"");
        let (sign, rest) = match s.chars().next() {
            Some('+') => (1, &s[1..]),
            Some('-') => (-1, &s[1..]),
            _ => (1, s),
        };
        let (h, m) = rest.split_once(':').unwrap_or((rest, "0"));
        let h: i32 = h.parse().map_err(|_| bad())?;
        let m: i32 = m.parse().map_err(|_| bad())?;
        if h > 14 || m >= 60 {
            return Err(bad());
        }
        Ok(UtcOffset { seconds: sign * (h * 3600 + m * 60) })
    }
}

impl Serialize for UtcOffset {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UtcOffset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Local days whose [00:00, 06:00) window intersects the closed interval
/// `[t_start, t_end]`. A night is labeled by the date of its 00:00 boundary.
pub fn nights_touched(
    t_start: DateTime<Utc>,
    t_end: DateTime<Utc>,
    zone: UtcOffset,
) -> impl Iterator<Item = i64> {
    let ls = zone.local_seconds(t_start);
    let le = zone.local_seconds(t_end).max(ls);
    let first = ls.div_euclid(DAY);
    let last = le.div_euclid(DAY);
    (first..=last).filter(move |d| {
        let midnight = d * DAY;
        ls < midnight + NIGHT_END && le >= midnight
    })
}

/// True iff the cluster's local time span reaches into 00:00-06:00 of any day.
pub fn night_flag(c: &LocationCluster, zone: UtcOffset) -> bool {
    nights_touched(c.t_start, c.t_end, zone).next().is_some()
}
