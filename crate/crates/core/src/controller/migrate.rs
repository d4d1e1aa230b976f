use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::channel::{ChannelKind, CommandChannel};
use super::presenter::{ClientEvent, SuppressReason};
use super::schedule::{CommandRecord, ExecOptions, Ordering, RollbackRecord};
use super::world::World;
use crate::dataplane::LearningConfig;
use crate::simengine::{FlowId, HostFlow, SimTime};
use crate::topology::{validate, HostId, Layout, NodeId, PortNo, ScenarioTopology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// No migration: the baseline run.
    None,
    /// Gateway-based redirection.
    Gateway,
    /// Flip interface admin states on the shared VLANs.
    InterfaceToggle,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::None, Strategy::Gateway, Strategy::InterfaceToggle];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Gateway => "gateway",
            Strategy::InterfaceToggle => "interface-toggle",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected none, gateway or interface-toggle)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationOptions {
    pub strategy: Strategy,
    pub ordering: Ordering,
    pub channel: CommandChannel,
    /// When the controller polls the old VN.
    pub migrate_at: SimTime,
    /// Wait before disconnecting the old VN; `None` is twice the largest
    /// old-VN path latency between gateways.
    pub drain_delay: Option<SimTime>,
    pub per_rule_cost: SimTime,
    /// Filler rules pre-installed on every old-VN switch.
    pub synthetic_rules: usize,
    /// dom0 buffer per interface, in packets.
    pub buffer_capacity: usize,
    pub learning: LearningConfig,
    pub exec: ExecOptions,
    /// Extra simulated time after the last flow and command.
    pub settle: SimTime,
    pub record_events: bool,
    pub record_trace: bool,
}

impl Default for MigrationOptions {
    fn default() -> Self {
        MigrationOptions {
            strategy: Strategy::Gateway,
            ordering: Ordering::Algorithm1,
            channel: CommandChannel::of_message(),
            migrate_at: SimTime::from_secs(2),
            drain_delay: None,
            per_rule_cost: SimTime::from_micros(700),
            synthetic_rules: 0,
            buffer_capacity: 10,
            learning: LearningConfig::default(),
            exec: ExecOptions::default(),
            settle: SimTime::from_secs(1),
            record_events: false,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub flow: FlowId,
    pub src: HostId,
    pub dst: HostId,
    pub rate_pps: f64,
    pub sent: u64,
    /// Distinct sequence numbers delivered.
    pub received: u64,
    pub duplicates: u64,
    /// Includes packets still in flight when the run ends.
    pub lost: u64,
    pub loss_pct: f64,
    /// Longest silence between consecutive deliveries.
    pub max_gap: SimTime,
    pub max_gap_start: Option<SimTime>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub events: u64,
    pub packets_emitted: u64,
    pub table_drops: u64,
    pub app_drops: u64,
    pub miss_drops: u64,
    pub egress_down_drops: u64,
    pub link_drops: u64,
    pub dom0_buffered: u64,
    pub dom0_discarded: u64,
    pub dom0_flushed: u64,
    pub stray_deliveries: u64,
    pub packet_ins: u64,
    pub learning_conflicts: u64,
    pub flow_mod_errors: u64,
}

/// When a host's traffic was moved onto the new VN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchOver {
    pub host: HostId,
    pub node: NodeId,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationTimeline {
    pub started: SimTime,
    pub cloned_rules: usize,
    pub clone_done: SimTime,
    pub drain_delay: SimTime,
    pub phase_done: Vec<SimTime>,
    pub finished: SimTime,
    /// First controller action to last confirmed command.
    pub duration: SimTime,
    pub switch_overs: Vec<SwitchOver>,
    pub commands: Vec<CommandRecord>,
    pub rollbacks: Vec<RollbackRecord>,
    pub abort: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub time: SimTime,
    pub event: ClientEvent,
}

/// One processed simulator event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: SimTime,
    pub kind: String,
    pub node: NodeId,
    pub port: Option<PortNo>,
    pub packet: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationMetrics {
    pub strategy: Strategy,
    pub ordering: Ordering,
    pub channel: ChannelKind,
    pub seed: u64,
    pub end_time: SimTime,
    pub flows: Vec<FlowStats>,
    pub migration: Option<MigrationTimeline>,
    pub counters: Counters,
    pub suppressed: BTreeMap<SuppressReason, u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub client_events: Vec<LoggedEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRecord>,
}

impl MigrationMetrics {
    pub fn total_sent(&self) -> u64 {
        self.flows.iter().map(|f| f.sent).sum()
    }

    pub fn total_lost(&self) -> u64 {
        self.flows.iter().map(|f| f.lost).sum()
    }

    pub fn max_gap(&self) -> SimTime {
        self.flows.iter().map(|f| f.max_gap).max().unwrap_or(SimTime::ZERO)
    }

    pub fn duration(&self) -> Option<SimTime> {
        self.migration.as_ref().map(|m| m.duration)
    }

    pub fn abort(&self) -> Option<&str> {
        self.migration.as_ref()?.abort.as_deref()
    }

    pub fn flow(&self, src: HostId, dst: HostId) -> Option<&FlowStats> {
        self.flows.iter().find(|f| f.src == src && f.dst == dst)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MigrationError {
    #[error("scenario is invalid: {0}")]
    InvalidScenario(String),
    #[error("strategy {strategy} cannot run on the {layout:?} layout")]
    StrategyLayout { strategy: Strategy, layout: Layout },
    #[error("flow {0:?} references an unknown host")]
    UnknownHost(FlowId),
}

/// Runs the traffic over the scenario and, unless the strategy is `None`,
/// migrates it from the old VN to the new one.
pub fn migrate(
    topo: &ScenarioTopology,
    flows: &[HostFlow],
    opts: &MigrationOptions,
    seed: u64,
) -> Result<MigrationMetrics, MigrationError> {
    let diags = validate(topo);
    if !diags.is_empty() {
        let text: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(MigrationError::InvalidScenario(text.join("; ")));
    }
    let ok = match opts.strategy {
        Strategy::None => true,
        Strategy::Gateway => !topo.gateways.is_empty(),
        Strategy::InterfaceToggle => topo.layout == Layout::SharedVlan,
    };
    if !ok {
        return Err(MigrationError::StrategyLayout { strategy: opts.strategy, layout: topo.layout });
    }
    let hosts = topo.hosts.len() as u32;
    if let Some(f) = flows.iter().find(|f| f.src.0 >= hosts || f.dst.0 >= hosts) {
        return Err(MigrationError::UnknownHost(f.id));
    }
    Ok(World::new(topo, flows, opts, seed).run())
}
