use serde::{Deserialize, Serialize};

use super::migrate::{migrate, MigrationError, MigrationMetrics, MigrationOptions, Strategy};
use super::schedule::Ordering;
use super::CommandChannel;
use crate::simengine::{FlowId, HostFlow, SimTime};
use crate::topology::{build_scenario, BuildError, HostId, Latencies, Layout, ScenarioTopology, VnShape};

/// Constant-rate traffic between host pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    pub rate_pps: f64,
    pub start: SimTime,
    pub duration: SimTime,
    /// Ordered `(src, dst)` pairs; empty means every ordered pair of hosts.
    pub pairs: Vec<(HostId, HostId)>,
    pub packet_size: u32,
}

impl TrafficSpec {
    pub fn none() -> Self {
        TrafficSpec { rate_pps: 0.0, start: SimTime::ZERO, duration: SimTime::ZERO, pairs: Vec::new(), packet_size: 1470 }
    }

    pub fn all_pairs(rate_pps: f64, start: SimTime, duration: SimTime) -> Self {
        TrafficSpec { rate_pps, start, duration, pairs: Vec::new(), packet_size: 1470 }
    }

    pub fn flows(&self, hosts: usize) -> Vec<HostFlow> {
        if self.rate_pps <= 0.0 || self.duration == SimTime::ZERO {
            return Vec::new();
        }
        let pairs: Vec<(HostId, HostId)> = if self.pairs.is_empty() {
            let n = hosts as u32;
            (0..n).flat_map(|a| (0..n).filter(move |b| *b != a).map(move |b| (HostId(a), HostId(b)))).collect()
        } else {
            self.pairs.clone()
        };
        pairs
            .into_iter()
            .enumerate()
            .map(|(i, (src, dst))| HostFlow {
                id: FlowId(i as u32),
                src,
                dst,
                rate: self.rate_pps,
                start: self.start,
                duration: self.duration,
                packet_size: self.packet_size,
            })
            .collect()
    }
}

/// Everything needed to run one migration experiment, minus the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub layout: Layout,
    pub hosts: usize,
    pub vn: VnShape,
    pub latencies: Latencies,
    pub traffic: TrafficSpec,
    pub migration: MigrationOptions,
}

impl Scenario {
    /// Three hosts behind gateways, six-switch line VNs, 1 ms per hop,
    /// 1000 pkt/s between every pair for 10 s, migration at 4 s.
    pub fn three_host_line() -> Self {
        Scenario {
            layout: Layout::Gateway,
            hosts: 3,
            vn: VnShape::line(6),
            latencies: Latencies::uniform(SimTime::from_millis(1)),
            traffic: TrafficSpec::all_pairs(1000.0, SimTime::ZERO, SimTime::from_secs(10)),
            migration: MigrationOptions { migrate_at: SimTime::from_secs(4), ..MigrationOptions::default() },
        }
    }

    /// Two hosts, two gateways, two-switch VNs.
    pub fn two_node() -> Self {
        Scenario {
            layout: Layout::Gateway,
            hosts: 2,
            vn: VnShape::line(2),
            latencies: Latencies::uniform(SimTime::from_millis(1)),
            traffic: TrafficSpec::all_pairs(1000.0, SimTime::ZERO, SimTime::from_secs(3)),
            migration: MigrationOptions {
                ordering: Ordering::Simultaneous,
                migrate_at: SimTime::from_secs(1),
                ..MigrationOptions::default()
            },
        }
    }

    /// Two hosts sharing a VLAN with both copies of a one-switch VN,
    /// migrated by interface toggling.
    pub fn shared_vlan_toggle() -> Self {
        Scenario {
            layout: Layout::SharedVlan,
            hosts: 2,
            vn: VnShape::line(1),
            latencies: Latencies::uniform(SimTime::from_millis(1)),
            traffic: TrafficSpec::all_pairs(100.0, SimTime::ZERO, SimTime::from_secs(20)),
            migration: MigrationOptions {
                strategy: Strategy::InterfaceToggle,
                channel: CommandChannel::ssh(),
                migrate_at: SimTime::from_secs(5),
                ..MigrationOptions::default()
            },
        }
    }

    pub fn build(&self, seed: u64) -> Result<ScenarioTopology, BuildError> {
        build_scenario(self.layout, self.hosts, &self.vn, &self.latencies, seed)
    }

    pub fn flows(&self) -> Vec<HostFlow> {
        self.traffic.flows(self.hosts)
    }

    pub fn run(&self, seed: u64) -> Result<MigrationMetrics, ScenarioError> {
        let topo = self.build(seed)?;
        Ok(migrate(&topo, &self.flows(), &self.migration, seed)?)
    }

    /// Rescales every latency so the one-way old-VN latency between the
    /// first two gateways (or hosts) equals `one_way`.
    pub fn with_reference_latency(&self, one_way: SimTime, seed: u64) -> Result<Scenario, ScenarioError> {
        let topo = self.build(seed)?;
        let current = reference_latency(&topo).ok_or(ScenarioError::NoReferencePath)?;
        let mut out = self.clone();
        out.latencies = self.latencies.scaled(one_way.0 as f64 / current.0 as f64);
        Ok(out)
    }
}

/// Old-VN one-way latency between the redirect points of hosts 1 and 2.
pub fn reference_latency(topo: &ScenarioTopology) -> Option<crate::simengine::SimTime> {
    use crate::topology::VnSide;
    match (topo.gateway_for_host(HostId(0)), topo.gateway_for_host(HostId(1))) {
        (Some(a), Some(b)) => topo.gateway_path_latency(a.node, b.node, VnSide::Old),
        _ => topo.host_path_latency(HostId(0), HostId(1), VnSide::Old),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Migration(#[from] MigrationError),
    #[error("hosts 1 and 2 are not connected")]
    NoReferencePath,
}
