//! Quantities with mandatory unit suffixes: `5ms`, `1.5s`, `700us`,
//! `1000pkt/s`, `1Mbit/s`.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::simengine::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UnitError {
    #[error("`{0}` has no unit suffix")]
    MissingUnit(String),
    #[error("`{0}` has an unknown unit (expected {1})")]
    UnknownUnit(String, &'static str),
    #[error("`{0}` is not a valid number")]
    BadNumber(String),
    #[error("`{0}` must not be negative")]
    Negative(String),
}

fn split(s: &str) -> Result<(f64, &str), UnitError> {
    let s = s.trim();
    let idx = s.find(|c: char| c.is_ascii_alphabetic()).ok_or_else(|| UnitError::MissingUnit(s.to_string()))?;
    let (num, unit) = s.split_at(idx);
    let v: f64 = num.trim().parse().map_err(|_| UnitError::BadNumber(s.to_string()))?;
    if !v.is_finite() {
        return Err(UnitError::BadNumber(s.to_string()));
    }
    if v < 0.0 {
        return Err(UnitError::Negative(s.to_string()));
    }
    Ok((v, unit.trim()))
}

pub fn parse_duration(s: &str) -> Result<SimTime, UnitError> {
    let (v, unit) = split(s)?;
    let us = match unit {
        "us" | "µs" => v,
        "ms" => v * 1e3,
        "s" => v * 1e6,
        _ => return Err(UnitError::UnknownUnit(s.trim().to_string(), "us, ms or s")),
    };
    Ok(SimTime(us.round() as u64))
}

/// Packet rate in packets per second. Bit rates are converted with
/// `packet_size` bytes per packet.
pub fn parse_rate(s: &str, packet_size: u32) -> Result<f64, UnitError> {
    let (v, unit) = split(s)?;
    let bits = f64::from(packet_size) * 8.0;
    match unit {
        "pkt/s" | "pps" => Ok(v),
        "kbit/s" | "kbps" => Ok(v * 1e3 / bits),
        "Mbit/s" | "Mbps" => Ok(v * 1e6 / bits),
        _ => Err(UnitError::UnknownUnit(s.trim().to_string(), "pkt/s, kbit/s or Mbit/s")),
    }
}

pub fn format_duration(t: SimTime) -> String {
    if t.0.is_multiple_of(1_000_000) {
        format!("{}s", t.0 / 1_000_000)
    } else if t.0.is_multiple_of(1000) {
        format!("{}ms", t.0 / 1000)
    } else {
        format!("{}us", t.0)
    }
}

/// A [`SimTime`] written with a unit suffix in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Duration(pub SimTime);

impl Serialize for Duration {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_duration(self.0))
    }
}

impl<'de> Deserialize<'de> for Duration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Duration;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a duration string such as \"5ms\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Duration, E> {
                parse_duration(v).map(Duration).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Duration, E> {
                Err(E::custom(UnitError::MissingUnit(v.to_string())))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Duration, E> {
                Err(E::custom(UnitError::MissingUnit(v.to_string())))
            }
        }
        d.deserialize_any(V)
    }
}

/// A rate kept as written until the packet size is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rate(pub String);

impl Rate {
    pub fn pps(&self, packet_size: u32) -> Result<f64, UnitError> {
        parse_rate(&self.0, packet_size)
    }
}
