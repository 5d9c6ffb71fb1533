//! Cell values and the comparisons the rest of the crate relies on.

use std::cmp::Ordering;
use std::fmt;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::model::MeasureType;

/// A single table cell.
///
/// Cells stay close to their source representation; interpretation as a
/// number or an instant happens against the column's [`MeasureType`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum Value {
    Null,
    Number(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Numeric reading of the cell, parsing text when needed.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            Value::Text(s) => s.trim().parse::<f64>().ok().filter(|n| n.is_finite()),
            Value::Null => None,
        }
    }

    /// Milliseconds since the Unix epoch, if the cell reads as a calendar instant.
    pub fn as_instant(&self) -> Option<f64> {
        parse_instant(self).map(|dt| dt.and_utc().timestamp_millis() as f64)
    }

    /// Position on a continuous scale for the given measure type.
    pub fn ordinal(&self, measure: MeasureType) -> Option<f64> {
        match measure {
            MeasureType::Quantitative => self.as_f64(),
            MeasureType::Temporal => self.as_instant(),
            MeasureType::Nominal | MeasureType::Ordinal => None,
        }
    }

    /// A stable textual identity used for hashing and distinct counts.
    pub fn canonical(&self) -> String {
        match self {
            Value::Null => "\u{0}null".to_string(),
            Value::Number(n) => format!("n:{}", n),
            Value::Text(s) => format!("s:{}", s),
        }
    }

    /// Equality under a column's measure type: instants for temporal,
    /// numbers for quantitative, display text otherwise.
    pub fn equals_as(&self, other: &Value, measure: MeasureType) -> bool {
        if self.is_null() || other.is_null() {
            return self.is_null() && other.is_null();
        }
        match measure {
            MeasureType::Quantitative | MeasureType::Temporal => {
                match (self.ordinal(measure), other.ordinal(measure)) {
                    (Some(a), Some(b)) => a == b,
                    _ => self.to_string() == other.to_string(),
                }
            }
            MeasureType::Nominal | MeasureType::Ordinal => self.to_string() == other.to_string(),
        }
    }

    /// Ordering under a column's measure type. Nulls sort last; values that
    /// fail to parse fall back to text order.
    pub fn compare_as(&self, other: &Value, measure: MeasureType) -> Ordering {
        match (self.is_null(), other.is_null()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Greater,
            (false, true) => return Ordering::Less,
            _ => {}
        }
        match (self.ordinal(measure), other.ordinal(measure)) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            _ => self.to_string().cmp(&other.to_string()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Number(n) => write!(f, "{}", n),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

/// A bare four-digit year in [1000, 2999].
pub fn as_year(value: &Value) -> Option<i32> {
    match value {
        Value::Number(n) if n.fract() == 0.0 && (1000.0..=2999.0).contains(n) => Some(*n as i32),
        Value::Text(s) => {
            let s = s.trim();
            if s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit()) {
                let y: i32 = s.parse().ok()?;
                (1000..=2999).contains(&y).then_some(y)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// `YYYY-MM-DD` without going through the format parser.
fn plain_date(s: &str) -> Option<NaiveDate> {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    let num = |r: std::ops::Range<usize>| -> Option<u32> {
        b[r].iter().try_fold(0u32, |acc, c| c.is_ascii_digit().then(|| acc * 10 + (c - b'0') as u32))
    };
    NaiveDate::from_ymd_opt(num(0..4)? as i32, num(5..7)?, num(8..10)?)
}

/// ISO-8601 date or date-time text.
pub fn parse_iso(text: &str) -> Option<NaiveDateTime> {
    let s = text.trim();
    if let Some(d) = plain_date(s) {
        return d.and_hms_opt(0, 0, 0);
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    if s.len() == 7 {
        if let Ok(d) = NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d") {
            return d.and_hms_opt(0, 0, 0);
        }
    }
    None
}

/// Reads a cell as a calendar instant: a bare year or ISO-8601 text.
pub fn parse_instant(value: &Value) -> Option<NaiveDateTime> {
    if let Some(y) = as_year(value) {
        return NaiveDate::from_ymd_opt(y, 1, 1)?.and_hms_opt(0, 0, 0);
    }
    match value {
        Value::Text(s) => parse_iso(s),
        _ => None,
    }
}

pub fn instant_from_millis(ms: f64) -> Option<NaiveDateTime> {
    DateTime::from_timestamp_millis(ms.round() as i64).map(|d| d.naive_utc())
}

/// Formats a number for descriptions and labels: integers print whole,
/// everything else rounds to two decimals with trailing zeros trimmed.
pub fn format_number(n: f64) -> String {
    if !n.is_finite() {
        return n.to_string();
    }
    if n.fract() == 0.0 && n.abs() < 1e15 {
        return format!("{}", n as i64);
    }
    let rounded = (n * 100.0).round() / 100.0;
    if rounded == 0.0 {
        return "0".to_string();
    }
    let s = format!("{:.2}", rounded);
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Formats an instant at the coarsest precision that loses nothing.
pub fn format_instant(dt: NaiveDateTime) -> String {
    let time_zero = dt.hour() == 0 && dt.minute() == 0 && dt.second() == 0;
    if time_zero && dt.month() == 1 && dt.day() == 1 {
        format!("{}", dt.year())
    } else if time_zero {
        dt.format("%Y-%m-%d").to_string()
    } else {
        dt.format("%Y-%m-%dT%H:%M:%S").to_string()
    }
}

/// Human-readable rendering of a cell under its measure type.
pub fn format_value(value: &Value, measure: MeasureType) -> String {
    match (measure, value) {
        (_, Value::Null) => "missing".to_string(),
        (MeasureType::Temporal, v) => match parse_instant(v) {
            Some(dt) => format_instant(dt),
            None => v.to_string(),
        },
        (_, Value::Number(n)) => format_number(*n),
        (_, Value::Text(s)) => s.clone(),
    }
}
