use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::simengine::{SimRng, SimTime};

/// Distribution of the delay between issuing a command and its execution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum LagModel {
    Constant { ms: f64 },
    Uniform { low_ms: f64, high_ms: f64 },
    /// Log-normal with the given median; `sigma` is the shape of the underlying normal.
    LogNormal { median_ms: f64, sigma: f64 },
}

impl LagModel {
    pub fn sample_ms(&self, rng: &mut SimRng) -> f64 {
        let v = match *self {
            LagModel::Constant { ms } => ms,
            LagModel::Uniform { low_ms, high_ms } => {
                if high_ms > low_ms {
                    rng.random_range(low_ms..=high_ms)
                } else {
                    low_ms
                }
            }
            LagModel::LogNormal { median_ms, sigma } => {
                let d = LogNormal::new(median_ms.ln(), sigma).expect("sigma is finite and non-negative");
                d.sample(rng)
            }
        };
        v.max(0.0)
    }

    /// Largest value the model can produce, if bounded.
    pub fn upper_bound_ms(&self) -> Option<f64> {
        match *self {
            LagModel::Constant { ms } => Some(ms.max(0.0)),
            LagModel::Uniform { low_ms, high_ms } => Some(low_ms.max(high_ms).max(0.0)),
            LagModel::LogNormal { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// Commands run through a remote shell on the switch host.
    Ssh,
    /// Flow-mods sent over the controller's OpenFlow session.
    OfMessage,
    /// Zero-lag channel for noiseless experiments.
    Ideal,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 3] = [ChannelKind::Ssh, ChannelKind::OfMessage, ChannelKind::Ideal];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Ssh => "ssh",
            ChannelKind::OfMessage => "of-message",
            ChannelKind::Ideal => "ideal",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChannelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown channel `{s}` (expected ssh, of-message or ideal)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandChannel {
    pub kind: ChannelKind,
    pub lag: LagModel,
    /// Added to every ssh command for session setup.
    pub auth_overhead_ms: f64,
}

impl CommandChannel {
    pub fn ssh() -> Self {
        CommandChannel {
            kind: ChannelKind::Ssh,
            lag: LagModel::LogNormal { median_ms: 1000.0, sigma: 0.35 },
            auth_overhead_ms: 150.0,
        }
    }

    pub fn of_message() -> Self {
        CommandChannel {
            kind: ChannelKind::OfMessage,
            lag: LagModel::Uniform { low_ms: 5.0, high_ms: 100.0 },
            auth_overhead_ms: 0.0,
        }
    }

    pub fn ideal() -> Self {
        CommandChannel { kind: ChannelKind::Ideal, lag: LagModel::Constant { ms: 0.0 }, auth_overhead_ms: 0.0 }
    }

    pub fn of_kind(kind: ChannelKind) -> Self {
        match kind {
            ChannelKind::Ssh => Self::ssh(),
            ChannelKind::OfMessage => Self::of_message(),
            ChannelKind::Ideal => Self::ideal(),
        }
    }

    pub fn sample_ms(&self, rng: &mut SimRng) -> f64 {
        let overhead = if self.kind == ChannelKind::Ssh { self.auth_overhead_ms } else { 0.0 };
        self.lag.sample_ms(rng) + overhead.max(0.0)
    }

    pub fn sample(&self, rng: &mut SimRng) -> SimTime {
        SimTime::from_millis_f64(self.sample_ms(rng))
    }
}
