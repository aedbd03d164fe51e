//! UTC instants with millisecond precision.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid timestamp `{0}`")]
pub struct TimestampParseError(pub String);

impl Timestamp {
    pub const MIN: Timestamp = Timestamp(i64::MIN);
    pub const MAX: Timestamp = Timestamp(i64::MAX);

    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs * 1000.0).round() as i64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Timestamp(self.0.saturating_add(ms))
    }

    /// Parse ISO-8601 forms: `2023-09-24T00:01:17`, `2023-09-24 00:01:17.250`,
    /// with an optional `Z` or numeric offset. A missing offset means UTC.
    pub fn parse(text: &str) -> Result<Self, TimestampParseError> {
        let s = text.trim();
        let err = || TimestampParseError(text.to_string());
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Self::from_datetime(dt.with_timezone(&Utc)));
        }
        let normalized = s.replacen(' ', "T", 1);
        if let Ok(dt) = DateTime::parse_from_rfc3339(&normalized) {
            return Ok(Self::from_datetime(dt.with_timezone(&Utc)));
        }
        let naive = normalized.trim_end_matches('Z');
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M"] {
            if let Ok(n) = NaiveDateTime::parse_from_str(naive, fmt) {
                return Ok(Self::from_datetime(Utc.from_utc_datetime(&n)));
            }
        }
        if let Ok(d) = NaiveDate::parse_from_str(naive, "%Y-%m-%d") {
            let n = d.and_hms_opt(0, 0, 0).ok_or_else(err)?;
            return Ok(Self::from_datetime(Utc.from_utc_datetime(&n)));
        }
        Err(err())
    }

    fn from_datetime(dt: DateTime<Utc>) -> Self {
        Timestamp(dt.timestamp_millis())
    }

    fn to_datetime(self) -> Option<DateTime<Utc>> {
        Utc.timestamp_millis_opt(self.0).single()
    }

    /// ISO weekday, Monday = 1 through Sunday = 7.
    pub fn iso_weekday(self) -> Option<u8> {
        self.to_datetime().map(|dt| dt.weekday().number_from_monday() as u8)
    }

    /// `2023-09-24 00:01:17`, with `.mmm` appended only when the
    /// sub-second part is non-zero.
    pub fn to_sentence_form(self) -> String {
        match self.to_datetime() {
            Some(dt) if self.0.rem_euclid(1000) == 0 => dt.format("%Y-%m-%d %H:%M:%S").to_string(),
            Some(dt) => dt.format("%Y-%m-%d %H:%M:%S%.3f").to_string(),
            None => self.0.to_string(),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_datetime() {
            Some(dt) => write!(f, "{}", dt.format("%Y-%m-%dT%H:%M:%S%.3fZ")),
            None => write!(f, "{}", self.0),
        }
    }
}

impl FromStr for Timestamp {
    type Err = TimestampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        let a = Timestamp::parse("2023-09-24T00:01:17").unwrap();
        let b = Timestamp::parse("2023-09-24 00:01:17").unwrap();
        let c = Timestamp::parse("2023-09-24T00:01:17.000Z").unwrap();
        let d = Timestamp::parse("2023-09-24T02:01:17+02:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a, d);
        assert_eq!(a.to_string(), "2023-09-24T00:01:17.000Z");
        assert_eq!(a.to_sentence_form(), "2023-09-24 00:01:17");
        assert_eq!(a.plus_millis(250).to_sentence_form(), "2023-09-24 00:01:17.250");
    }

    #[test]
    fn weekday() {
        // 2023-09-24 was a Sunday.
        let t = Timestamp::parse("2023-09-24T00:01:17").unwrap();
        assert_eq!(t.iso_weekday(), Some(7));
    }

    #[test]
    fn rejects_garbage() {
        assert!(Timestamp::parse("yesterday").is_err());
        assert!(Timestamp::parse("").is_err());
    }
}
