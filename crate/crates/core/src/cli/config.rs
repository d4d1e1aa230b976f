//! The TOML scenario file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::units::{Duration, Rate, UnitError};
use crate::controller::{ChannelKind, CommandChannel, MigrationOptions, Ordering, Scenario, Strategy, TrafficSpec};
use crate::dataplane::LearningConfig;
use crate::simengine::SimTime;
use crate::topology::{HostId, Latencies, Layout, VnShape};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("`{key}`: {source}")]
    Unit { key: String, source: UnitError },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    /// Config keys the error is about.
    pub fn keys(&self) -> Vec<String> {
        match self {
            ConfigError::UnknownKeys(k) => k.clone(),
            ConfigError::Unit { key, .. } | ConfigError::Invalid { key, .. } => vec![key.clone()],
            _ => Vec::new(),
        }
    }
}

fn invalid(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default)]
    pub seed: u64,
    pub topology: TopologySection,
    pub latency: LatencySection,
    #[serde(default)]
    pub traffic: Option<TrafficSection>,
    #[serde(default)]
    pub migration: MigrationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySection {
    pub layout: Layout,
    pub hosts: usize,
    pub switches: usize,
    /// VN links as pairs of switch indices.
    pub links: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attach: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySection {
    /// Used for every hop not given explicitly.
    pub default: Duration,
    pub host_gateway: Option<Duration>,
    pub gateway_vlan: Option<Duration>,
    pub vlan_switch: Option<Duration>,
    pub vn_link: Option<Duration>,
    pub stitch: Option<Duration>,
    pub host_vlan: Option<Duration>,
    /// Per VN link, keyed `"a-b"`.
    #[serde(default)]
    pub vn_links: BTreeMap<String, Duration>,
    pub capacity: Option<Rate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSection {
    pub rate: Rate,
    #[serde(default = "zero")]
    pub start: Duration,
    pub duration: Duration,
    /// 1-based host numbers; empty means every ordered pair.
    #[serde(default)]
    pub pairs: Vec<(u32, u32)>,
    #[serde(default = "default_packet_size")]
    pub packet_size: u32,
}

fn zero() -> Duration {
    Duration(SimTime::ZERO)
}

fn default_packet_size() -> u32 {
    1470
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MigrationSection {
    pub strategy: Option<Strategy>,
    pub ordering: Option<Ordering>,
    pub channel: Option<ChannelKind>,
    pub migrate_at: Option<Duration>,
    pub drain_delay: Option<Duration>,
    pub per_rule_cost: Option<Duration>,
    pub synthetic_rules: Option<usize>,
    pub buffer_capacity: Option<usize>,
    pub drop_duration: Option<Duration>,
    /// `"none"` keeps learned rules forever.
    pub rule_ttl: Option<String>,
    pub ack_timeout: Option<Duration>,
    pub loss_probability: Option<f64>,
    pub settle: Option<Duration>,
}

/// Parses a scenario file, reporting every unknown key at once.
pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile, ConfigError> {
    let mut unknown = Vec::new();
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
    let parsed: Result<ScenarioFile, _> = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()));
    if !unknown.is_empty() {
        unknown.sort();
        return Err(ConfigError::UnknownKeys(unknown));
    }
    parsed.map_err(|e| ConfigError::Parse(e.message().trim().to_string()))
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
    parse_scenario_file(&text)
}

impl ScenarioFile {
    /// Resolves units and defaults into a runnable scenario.
    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        let t = &self.topology;
        let vn = VnShape { switches: t.switches, links: t.links.clone(), attach: t.attach.clone() };

        let l = &self.latency;
        let d = l.default.0;
        let pick = |v: &Option<Duration>| v.map_or(d, |x| x.0);
        let mut latencies = Latencies::uniform(d);
        latencies.host_gateway = pick(&l.host_gateway);
        latencies.gateway_vlan = pick(&l.gateway_vlan);
        latencies.vlan_switch = pick(&l.vlan_switch);
        latencies.vn_link = pick(&l.vn_link);
        latencies.stitch = pick(&l.stitch);
        latencies.host_vlan = pick(&l.host_vlan);
        for (k, v) in &l.vn_links {
            let key = format!("latency.vn_links.{k}");
            let (a, b) = k.split_once('-').ok_or_else(|| invalid(&key, "expected \"a-b\""))?;
            let a: usize = a.trim().parse().map_err(|_| invalid(&key, "bad switch index"))?;
            let b: usize = b.trim().parse().map_err(|_| invalid(&key, "bad switch index"))?;
            latencies.vn_link_overrides.insert(Latencies::override_key(a, b), v.0);
        }

        let traffic = match &self.traffic {
            None => TrafficSpec::none(),
            Some(tr) => {
                let rate_pps = tr
                    .rate
                    .pps(tr.packet_size)
                    .map_err(|source| ConfigError::Unit { key: "traffic.rate".into(), source })?;
                let mut pairs = Vec::with_capacity(tr.pairs.len());
                for &(a, b) in &tr.pairs {
                    if a == 0 || b == 0 || a as usize > t.hosts || b as usize > t.hosts || a == b {
                        return Err(invalid("traffic.pairs", format!("bad host pair [{a}, {b}]")));
                    }
                    pairs.push((HostId(a - 1), HostId(b - 1)));
                }
                if tr.packet_size == 0 {
                    return Err(invalid("traffic.packet_size", "must be positive"));
                }
                TrafficSpec { rate_pps, start: tr.start.0, duration: tr.duration.0, pairs, packet_size: tr.packet_size }
            }
        };
        if let Some(c) = &l.capacity {
            let pps = c
                .pps(traffic.packet_size)
                .map_err(|source| ConfigError::Unit { key: "latency.capacity".into(), source })?;
            latencies.capacity_pps = pps.round() as u64;
        }

        let m = &self.migration;
        let mut opts = MigrationOptions::default();
        if let Some(s) = m.strategy {
            opts.strategy = s;
        }
        if let Some(o) = m.ordering {
            opts.ordering = o;
        }
        if let Some(c) = m.channel {
            opts.channel = CommandChannel::of_kind(c);
        }
        if let Some(v) = m.migrate_at {
            opts.migrate_at = v.0;
        }
        opts.drain_delay = m.drain_delay.map(|v| v.0);
        if let Some(v) = m.per_rule_cost {
            opts.per_rule_cost = v.0;
        }
        if let Some(v) = m.synthetic_rules {
            opts.synthetic_rules = v;
        }
        if let Some(v) = m.buffer_capacity {
            opts.buffer_capacity = v;
        }
        let mut learning = LearningConfig::default();
        if let Some(v) = m.drop_duration {
            learning.drop_duration = v.0;
        }
        if let Some(v) = &m.rule_ttl {
            learning.rule_ttl = if v.trim() == "none" {
                None
            } else {
                Some(
                    super::units::parse_duration(v)
                        .map_err(|source| ConfigError::Unit { key: "migration.rule_ttl".into(), source })?,
                )
            };
        }
        opts.learning = learning;
        if let Some(v) = m.ack_timeout {
            opts.exec.ack_timeout = v.0;
        }
        if let Some(p) = m.loss_probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid("migration.loss_probability", "must lie in [0, 1]"));
            }
            opts.exec.loss_probability = p;
        }
        if let Some(v) = m.settle {
            opts.settle = v.0;
        }

        Ok(Scenario { layout: t.layout, hosts: t.hosts, vn, latencies, traffic, migration: opts })
    }
}
