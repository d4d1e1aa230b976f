use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::*;
use super::VnMapping;
use crate::simengine::rng::{self, Stream};
use crate::simengine::SimTime;

/// Logical VN graph: switch count, undirected links, and which switch each host attaches to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VnShape {
    pub switches: usize,
    pub links: Vec<(usize, usize)>,
    /// `attach[h]` is the switch index host `h` hangs off. Defaults to `h mod switches`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attach: Option<Vec<usize>>,
}

impl VnShape {
    pub fn line(n: usize) -> Self {
        VnShape { switches: n, links: (1..n).map(|i| (i - 1, i)).collect(), attach: None }
    }

    pub fn ring(n: usize) -> Self {
        let mut s = Self::line(n);
        if n > 2 {
            s.links.push((n - 1, 0));
        }
        s
    }

    pub fn with_attach(mut self, attach: Vec<usize>) -> Self {
        self.attach = Some(attach);
        self
    }

    pub fn attachment(&self, host: usize) -> usize {
        match &self.attach {
            Some(a) => a[host],
            None => host % self.switches,
        }
    }

    pub fn is_connected(&self) -> bool {
        if self.switches == 0 {
            return false;
        }
        let mut seen = vec![false; self.switches];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(a, b) in &self.links {
                let v = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if v < self.switches && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn check(&self, host_count: usize) -> Result<(), BuildError> {
        if self.switches == 0 {
            return Err(BuildError::EmptyVn);
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.links {
            if a >= self.switches || b >= self.switches || a == b {
                return Err(BuildError::BadLink(a, b));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(BuildError::BadLink(a, b));
            }
        }
        if !self.is_connected() {
            return Err(BuildError::Disconnected);
        }
        if let Some(att) = &self.attach {
            if att.len() != host_count {
                return Err(BuildError::BadAttachment(format!(
                    "{} attachments for {} hosts",
                    att.len(),
                    host_count
                )));
            }
            if let Some(bad) = att.iter().find(|s| **s >= self.switches) {
                return Err(BuildError::BadAttachment(format!("switch index {bad} out of range")));
            }
        }
        Ok(())
    }
}

/// Per-hop latencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Latencies {
    pub host_gateway: SimTime,
    /// Gateway (or bridge) to rack switch.
    pub gateway_vlan: SimTime,
    /// Rack switch to VN switch.
    pub vlan_switch: SimTime,
    pub vn_link: SimTime,
    /// Per-edge overrides keyed by `(min index, max index)`.
    #[serde(default)]
    pub vn_link_overrides: BTreeMap<String, SimTime>,
    /// Stitched gateway-to-bridge link (cross-aggregate only).
    pub stitch: SimTime,
    /// Host to rack switch (shared-VLAN layout only).
    pub host_vlan: SimTime,
    pub capacity_pps: u64,
}

impl Latencies {
    pub fn uniform(latency: SimTime) -> Self {
        Latencies {
            host_gateway: latency,
            gateway_vlan: latency,
            vlan_switch: latency,
            vn_link: latency,
            vn_link_overrides: BTreeMap::new(),
            stitch: latency,
            host_vlan: latency,
            capacity_pps: 100_000,
        }
    }

    pub fn override_key(a: usize, b: usize) -> String {
        format!("{}-{}", a.min(b), a.max(b))
    }

    fn vn_link_latency(&self, a: usize, b: usize) -> SimTime {
        self.vn_link_overrides.get(&Self::override_key(a, b)).copied().unwrap_or(self.vn_link)
    }

    /// Every latency multiplied by `factor` (rounded to the microsecond, floored at 1 us).
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |t: SimTime| SimTime(t.scale(factor).0.max(1));
        Latencies {
            host_gateway: s(self.host_gateway),
            gateway_vlan: s(self.gateway_vlan),
            vlan_switch: s(self.vlan_switch),
            vn_link: s(self.vn_link),
            vn_link_overrides: self.vn_link_overrides.iter().map(|(k, v)| (k.clone(), s(*v))).collect(),
            stitch: s(self.stitch),
            host_vlan: s(self.host_vlan),
            capacity_pps: self.capacity_pps,
        }
    }

    fn check(&self) -> Result<(), BuildError> {
        let named = [
            ("host_gateway", self.host_gateway),
            ("gateway_vlan", self.gateway_vlan),
            ("vlan_switch", self.vlan_switch),
            ("vn_link", self.vn_link),
            ("stitch", self.stitch),
            ("host_vlan", self.host_vlan),
        ];
        for (name, t) in named {
            if t == SimTime::ZERO {
                return Err(BuildError::NonPositiveLatency(name.to_string()));
            }
        }
        for (k, t) in &self.vn_link_overrides {
            if *t == SimTime::ZERO {
                return Err(BuildError::NonPositiveLatency(format!("vn link {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("at least 2 hosts are required, got {0}")]
    TooFewHosts(usize),
    #[error("VN shape has no switches")]
    EmptyVn,
    #[error("VN shape is disconnected")]
    Disconnected,
    #[error("invalid VN link {0}-{1}")]
    BadLink(usize, usize),
    #[error("invalid host attachment: {0}")]
    BadAttachment(String),
    #[error("latency `{0}` must be positive")]
    NonPositiveLatency(String),
}

const OLD_DPID_BASE: u64 = 0x0100;
const NEW_DPID_BASE: u64 = 0x0200;
const GATEWAY_DPID_BASE: u64 = 0x0300;

struct Builder {
    nodes: Vec<Node>,
    links: Vec<SubstrateLink>,
    vlans: Vec<SharedVlan>,
    capacity: u64,
}

impl Builder {
    fn add_node(
        &mut self,
        name: String,
        role: NodeRole,
        aggregate: AggregateId,
        dpid: Option<Dpid>,
        ports: impl IntoIterator<Item = PortNo>,
    ) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            name,
            role,
            aggregate,
            machine: None,
            dpid,
            ports: ports.into_iter().map(|no| PortSpec { no, initially_up: true }).collect(),
        });
        id
    }

    fn link(&mut self, a: Endpoint, b: Endpoint, latency: SimTime, stitched: bool) {
        self.links.push(SubstrateLink { a, b, latency, capacity_pps: self.capacity, stitched });
    }

    fn hub(&mut self, aggregate: AggregateId, ports: u16) -> (NodeId, u16) {
        let vlan = 100 + self.vlans.len() as u16;
        let id = self.add_node(
            format!("rack-v{vlan}"),
            NodeRole::RackSwitch { vlan },
            aggregate,
            None,
            (1..=ports).map(PortNo),
        );
        (id, vlan)
    }
}

fn spanning_tree(switches: usize, links: &[(usize, usize)]) -> BTreeSet<usize> {
    let mut seen = vec![false; switches];
    let mut tree = BTreeSet::new();
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for (i, &(a, b)) in links.iter().enumerate() {
            let v = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if !seen[v] {
                seen[v] = true;
                tree.insert(i);
                queue.push_back(v);
            }
        }
    }
    tree
}

fn build_vn(
    b: &mut Builder,
    side: VnSide,
    shape: &VnShape,
    host_count: usize,
    aggregate: AggregateId,
    rng: &mut crate::simengine::SimRng,
) -> VirtualNetwork {
    let base = match side {
        VnSide::Old => OLD_DPID_BASE,
        VnSide::New => NEW_DPID_BASE,
    };
    // Port slots: VN edges in link order, then host attachments in host order.
    let mut slots: Vec<Vec<Slot>> = vec![Vec::new(); shape.switches];
    for (k, &(x, y)) in shape.links.iter().enumerate() {
        slots[x].push(Slot::Edge(k));
        slots[y].push(Slot::Edge(k));
    }
    for h in 0..host_count {
        slots[shape.attachment(h)].push(Slot::Host(h));
    }

    let mut switches = Vec::new();
    let mut dpids = Vec::new();
    let mut slot_ports: Vec<Vec<PortNo>> = Vec::new();
    for (i, s) in slots.iter().enumerate() {
        let mut ports: Vec<PortNo> = (1..=s.len() as u16).map(PortNo).collect();
        if side == VnSide::New {
            // Ports in the new VN come out in whatever order the reservation assigned.
            ports.shuffle(rng);
        }
        let dpid = Dpid(base + i as u64);
        let suffix = if side == VnSide::New { "'" } else { "" };
        let id = b.add_node(
            format!("s{}{}", i + 1, suffix),
            NodeRole::VnSwitch { side, index: i },
            aggregate,
            Some(dpid),
            ports.iter().copied(),
        );
        b.nodes[id.0 as usize].machine = Some(format!("pc{}-{}", aggregate.0, i / 2));
        b.nodes[id.0 as usize].ports.sort_by_key(|p| p.no);
        switches.push(id);
        dpids.push(dpid);
        slot_ports.push(ports);
    }

    let port_for = |sw: usize, slot: Slot| -> PortNo {
        let j = slots[sw].iter().position(|s| *s == slot).expect("slot exists");
        slot_ports[sw][j]
    };

    let edges: Vec<VnEdge> = shape
        .links
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| VnEdge {
            a: x,
            b: y,
            port_a: port_for(x, Slot::Edge(k)),
            port_b: port_for(y, Slot::Edge(k)),
        })
        .collect();
    let attachments = (0..host_count)
        .map(|h| {
            let sw = shape.attachment(h);
            Attachment { host: HostId(h as u32), switch: sw, port: port_for(sw, Slot::Host(h)) }
        })
        .collect();

    VirtualNetwork {
        side,
        switches,
        dpids,
        edges,
        tree: spanning_tree(shape.switches, &shape.links),
        attachments,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Edge(usize),
    Host(usize),
}

fn derive_mapping(old: &VirtualNetwork, new: &VirtualNetwork) -> VnMapping {
    let mut m = VnMapping::new();
    for i in 0..old.switches.len() {
        m.insert_switch(old.dpids[i], new.dpids[i]);
    }
    for (eo, en) in old.edges.iter().zip(&new.edges) {
        m.insert_port(old.dpids[eo.a], eo.port_a, en.port_a);
        m.insert_port(old.dpids[eo.b], eo.port_b, en.port_b);
    }
    for (ao, an) in old.attachments.iter().zip(&new.attachments) {
        m.insert_port(old.dpids[ao.switch], ao.port, an.port);
    }
    m
}

/// Builds any of the supported layouts.
pub fn build_scenario(
    layout: Layout,
    host_count: usize,
    shape: &VnShape,
    latencies: &Latencies,
    seed: u64,
) -> Result<ScenarioTopology, BuildError> {
    if host_count < 2 {
        return Err(BuildError::TooFewHosts(host_count));
    }
    shape.check(host_count)?;
    latencies.check()?;

    let mut rng = rng::stream(seed, Stream::PortShuffle);
    let mut b = Builder { nodes: Vec::new(), links: Vec::new(), vlans: Vec::new(), capacity: latencies.capacity_pps };

    let aggregates = match layout {
        Layout::CrossAggregate => vec![
            Aggregate { id: AggregateId(0), name: "hosts".into() },
            Aggregate { id: AggregateId(1), name: "old-vn".into() },
            Aggregate { id: AggregateId(2), name: "new-vn".into() },
        ],
        _ => vec![Aggregate { id: AggregateId(0), name: "site".into() }],
    };
    let side_agg = |side: VnSide| match layout {
        Layout::CrossAggregate => AggregateId(1 + side.index() as u16),
        _ => AggregateId(0),
    };

    let hosts: Vec<NodeId> = (0..host_count)
        .map(|h| {
            b.add_node(
                format!("h{}", h + 1),
                NodeRole::Host { host: HostId(h as u32) },
                AggregateId(0),
                None,
                [PortNo(1)],
            )
        })
        .collect();

    let old = build_vn(&mut b, VnSide::Old, shape, host_count, side_agg(VnSide::Old), &mut rng);
    let new = build_vn(&mut b, VnSide::New, shape, host_count, side_agg(VnSide::New), &mut rng);
    for vn in [&old, &new] {
        for (k, e) in vn.edges.iter().enumerate() {
            let (x, y) = shape.links[k];
            b.link(
                Endpoint::new(vn.switches[e.a], e.port_a),
                Endpoint::new(vn.switches[e.b], e.port_b),
                latencies.vn_link_latency(x, y),
                false,
            );
        }
    }

    let mut gateways = Vec::new();
    for (h, &host) in hosts.iter().enumerate().take(host_count) {
        let host_ep = Endpoint::new(host, PortNo(1));
        let attach = |vn: &VirtualNetwork| {
            let a = &vn.attachments[h];
            Endpoint::new(vn.switches[a.switch], a.port)
        };
        match layout {
            Layout::SharedVlan => {
                let (hub, vlan_id) = b.hub(AggregateId(0), 3);
                let old_ep = attach(&old);
                let new_ep = attach(&new);
                b.link(host_ep, Endpoint::new(hub, PortNo(1)), latencies.host_vlan, false);
                b.link(Endpoint::new(hub, PortNo(2)), old_ep, latencies.vlan_switch, false);
                b.link(Endpoint::new(hub, PortNo(3)), new_ep, latencies.vlan_switch, false);
                let new_node = &mut b.nodes[new_ep.node.0 as usize];
                if let Some(p) = new_node.ports.iter_mut().find(|p| p.no == new_ep.port) {
                    p.initially_up = false;
                }
                b.vlans.push(SharedVlan {
                    vlan_id,
                    members: [host_ep, old_ep, new_ep].into_iter().collect(),
                    hub_node: hub,
                });
            }
            Layout::Gateway | Layout::CrossAggregate => {
                let dpid = Dpid(GATEWAY_DPID_BASE + h as u64);
                let gw = b.add_node(
                    format!("gw{}", h + 1),
                    NodeRole::Gateway,
                    AggregateId(0),
                    Some(dpid),
                    [PortNo(1), PortNo(2), PortNo(3)],
                );
                b.link(host_ep, Endpoint::new(gw, PortNo(1)), latencies.host_gateway, false);
                for (side, gw_port, vn) in [(VnSide::Old, PortNo(2), &old), (VnSide::New, PortNo(3), &new)] {
                    let sw_ep = attach(vn);
                    let agg = side_agg(side);
                    let vlan_side = if layout == Layout::CrossAggregate {
                        let tick = if side == VnSide::New { "'" } else { "" };
                        let br = b.add_node(
                            format!("br{}{}", h + 1, tick),
                            NodeRole::Bridge { side },
                            agg,
                            None,
                            [PortNo(1), PortNo(2)],
                        );
                        b.link(Endpoint::new(gw, gw_port), Endpoint::new(br, PortNo(1)), latencies.stitch, true);
                        Endpoint::new(br, PortNo(2))
                    } else {
                        Endpoint::new(gw, gw_port)
                    };
                    let (hub, vlan_id) = b.hub(agg, 2);
                    b.link(vlan_side, Endpoint::new(hub, PortNo(1)), latencies.gateway_vlan, false);
                    b.link(Endpoint::new(hub, PortNo(2)), sw_ep, latencies.vlan_switch, false);
                    b.vlans.push(SharedVlan {
                        vlan_id,
                        members: [vlan_side, sw_ep].into_iter().collect(),
                        hub_node: hub,
                    });
                }
                gateways.push(GatewayPorts {
                    node: gw,
                    dpid,
                    host: HostId(h as u32),
                    host_port: PortNo(1),
                    old_port: PortNo(2),
                    new_port: PortNo(3),
                });
            }
        }
    }

    let mapping = derive_mapping(&old, &new);
    Ok(ScenarioTopology {
        layout,
        aggregates,
        nodes: b.nodes,
        substrate_links: b.links,
        shared_vlans: b.vlans,
        vns: [old, new],
        gateways,
        hosts,
        mapping,
    })
}

/// Hosts attach through per-host gateway switches, each joined to both VNs
/// by its own pair of shared VLANs.
pub fn build_gateway_scenario(
    host_count: usize,
    shape: &VnShape,
    latencies: &Latencies,
    seed: u64,
) -> Result<ScenarioTopology, BuildError> {
    build_scenario(Layout::Gateway, host_count, shape, latencies, seed)
}

/// Gateway layout split over three aggregates, with a bridge node per gateway per VN
/// between the stitched link and the VN-side shared VLAN.
pub fn build_cross_aggregate_scenario(
    host_count: usize,
    shape: &VnShape,
    latencies: &Latencies,
    seed: u64,
) -> Result<ScenarioTopology, BuildError> {
    build_scenario(Layout::CrossAggregate, host_count, shape, latencies, seed)
}

/// Gateway-free layout: each host shares one VLAN with its old-VN and new-VN
/// switch; the new-VN attachment starts administratively down.
pub fn build_shared_vlan_scenario(
    host_count: usize,
    shape: &VnShape,
    latencies: &Latencies,
    seed: u64,
) -> Result<ScenarioTopology, BuildError> {
    build_scenario(Layout::SharedVlan, host_count, shape, latencies, seed)
}
