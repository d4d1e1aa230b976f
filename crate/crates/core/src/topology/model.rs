use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use super::VnMapping;
use crate::simengine::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PortNo(pub u16);

/// OpenFlow datapath id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dpid(pub u64);

/// Endpoint address carried in packets (stands in for a MAC/IP).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HostId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AggregateId(pub u16);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for PortNo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Dpid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VnSide {
    Old,
    New,
}

impl VnSide {
    pub fn index(self) -> usize {
        match self {
            VnSide::Old => 0,
            VnSide::New => 1,
        }
    }

    pub fn other(self) -> VnSide {
        match self {
            VnSide::Old => VnSide::New,
            VnSide::New => VnSide::Old,
        }
    }
}

impl fmt::Display for VnSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VnSide::Old => "old",
            VnSide::New => "new",
        })
    }
}

/// Which experimental topology a scenario was built as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Gateways attach each host to both VNs through two shared VLANs.
    Gateway,
    /// Gateway layout with hosts, old VN and new VN in three aggregates,
    /// joined through stitched links and bridge nodes.
    CrossAggregate,
    /// No gateways: each host shares one VLAN with both VNs and migration
    /// toggles interface admin state.
    SharedVlan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NodeRole {
    Host { host: HostId },
    Gateway,
    VnSwitch { side: VnSide, index: usize },
    Bridge { side: VnSide },
    /// Rack switch that floods a shared VLAN.
    RackSwitch { vlan: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSpec {
    pub no: PortNo,
    pub initially_up: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub role: NodeRole,
    pub aggregate: AggregateId,
    /// Physical machine hosting this VM, when it is a virtual switch.
    pub machine: Option<String>,
    pub dpid: Option<Dpid>,
    pub ports: Vec<PortSpec>,
}

impl Node {
    pub fn has_port(&self, port: PortNo) -> bool {
        self.ports.iter().any(|p| p.no == port)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub node: NodeId,
    pub port: PortNo,
}

impl Endpoint {
    pub fn new(node: NodeId, port: PortNo) -> Self {
        Endpoint { node, port }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.node, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstrateLink {
    pub a: Endpoint,
    pub b: Endpoint,
    pub latency: SimTime,
    pub capacity_pps: u64,
    pub stitched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedVlan {
    pub vlan_id: u16,
    pub members: BTreeSet<Endpoint>,
    pub hub_node: NodeId,
}

impl SharedVlan {
    /// Broadcast delivery set: every member except the origin interface.
    pub fn delivery_set(&self, origin: Endpoint) -> impl Iterator<Item = Endpoint> + '_ {
        self.members.iter().copied().filter(move |m| *m != origin)
    }
}

/// A host attachment on a VN switch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub host: HostId,
    pub switch: usize,
    pub port: PortNo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualNetwork {
    pub side: VnSide,
    /// Switch nodes by logical index.
    pub switches: Vec<NodeId>,
    pub dpids: Vec<Dpid>,
    /// Logical edges between switch indices, with the port used at each end.
    pub edges: Vec<VnEdge>,
    /// Indices into `edges` forming the flooding spanning tree.
    pub tree: BTreeSet<usize>,
    pub attachments: Vec<Attachment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VnEdge {
    pub a: usize,
    pub b: usize,
    pub port_a: PortNo,
    pub port_b: PortNo,
}

impl VirtualNetwork {
    pub fn index_of(&self, node: NodeId) -> Option<usize> {
        self.switches.iter().position(|n| *n == node)
    }

    /// Ports a switch floods on: spanning-tree edge ports plus host attachments.
    pub fn flood_ports(&self, index: usize) -> BTreeSet<PortNo> {
        let mut out = BTreeSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            if !self.tree.contains(&i) {
                continue;
            }
            if e.a == index {
                out.insert(e.port_a);
            }
            if e.b == index {
                out.insert(e.port_b);
            }
        }
        for att in &self.attachments {
            if att.switch == index {
                out.insert(att.port);
            }
        }
        out
    }
}

/// Port roles of one gateway switch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayPorts {
    pub node: NodeId,
    pub dpid: Dpid,
    pub host: HostId,
    pub host_port: PortNo,
    pub old_port: PortNo,
    pub new_port: PortNo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    pub id: AggregateId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTopology {
    pub layout: Layout,
    pub aggregates: Vec<Aggregate>,
    pub nodes: Vec<Node>,
    pub substrate_links: Vec<SubstrateLink>,
    pub shared_vlans: Vec<SharedVlan>,
    /// `[old, new]`.
    pub vns: [VirtualNetwork; 2],
    pub gateways: Vec<GatewayPorts>,
    /// Host nodes, indexed by `HostId`.
    pub hosts: Vec<NodeId>,
    pub mapping: VnMapping,
}

impl ScenarioTopology {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn vn(&self, side: VnSide) -> &VirtualNetwork {
        &self.vns[side.index()]
    }

    pub fn host_node(&self, host: HostId) -> NodeId {
        self.hosts[host.0 as usize]
    }

    pub fn host_ids(&self) -> impl Iterator<Item = HostId> + '_ {
        (0..self.hosts.len() as u32).map(HostId)
    }

    pub fn node_by_dpid(&self, dpid: Dpid) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.dpid == Some(dpid)).map(|n| n.id)
    }

    pub fn gateway(&self, node: NodeId) -> Option<&GatewayPorts> {
        self.gateways.iter().find(|g| g.node == node)
    }

    pub fn gateway_for_host(&self, host: HostId) -> Option<&GatewayPorts> {
        self.gateways.iter().find(|g| g.host == host)
    }

    /// Every link endpoint mapped to `(link index, far endpoint)`.
    pub fn wiring(&self) -> BTreeMap<Endpoint, (usize, Endpoint)> {
        let mut w = BTreeMap::new();
        for (i, l) in self.substrate_links.iter().enumerate() {
            w.insert(l.a, (i, l.b));
            w.insert(l.b, (i, l.a));
        }
        w
    }

    pub fn vlan_of(&self, ep: Endpoint) -> Option<&SharedVlan> {
        self.shared_vlans.iter().find(|v| v.members.contains(&ep))
    }

    /// Nodes on `side` of the migration that carry traffic only for that VN.
    fn side_of(&self, node: NodeId) -> Option<VnSide> {
        match self.node(node).role {
            NodeRole::VnSwitch { side, .. } | NodeRole::Bridge { side } => Some(side),
            NodeRole::RackSwitch { .. } => {
                // A gateway-layout rack switch belongs to the VN it leads to.
                let v = self.shared_vlans.iter().find(|v| v.hub_node == node)?;
                let sides: BTreeSet<_> =
                    v.members.iter().filter_map(|m| self.side_of_leaf(m.node)).collect();
                if sides.len() == 1 {
                    sides.into_iter().next()
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    fn side_of_leaf(&self, node: NodeId) -> Option<VnSide> {
        match self.node(node).role {
            NodeRole::VnSwitch { side, .. } | NodeRole::Bridge { side } => Some(side),
            _ => None,
        }
    }

    fn is_tree_link(&self, link: &SubstrateLink) -> bool {
        for vn in &self.vns {
            for (i, e) in vn.edges.iter().enumerate() {
                let ea = Endpoint::new(vn.switches[e.a], e.port_a);
                let eb = Endpoint::new(vn.switches[e.b], e.port_b);
                if (link.a == ea && link.b == eb) || (link.a == eb && link.b == ea) {
                    return vn.tree.contains(&i);
                }
            }
        }
        true
    }

    /// Shortest-latency distances from `from` over the part of the substrate
    /// that carries traffic through `side` (VN links restricted to the
    /// flooding tree, which is where learned paths run).
    fn distances(&self, from: NodeId, side: VnSide) -> BTreeMap<NodeId, SimTime> {
        let mut g: UnGraph<NodeId, u64> = UnGraph::new_undirected();
        let idx: Vec<NodeIndex> = self.nodes.iter().map(|n| g.add_node(n.id)).collect();
        let excluded = |n: NodeId| self.side_of(n) == Some(side.other());
        for l in &self.substrate_links {
            if excluded(l.a.node) || excluded(l.b.node) || !self.is_tree_link(l) {
                continue;
            }
            g.add_edge(idx[l.a.node.0 as usize], idx[l.b.node.0 as usize], l.latency.0);
        }
        let start = idx[from.0 as usize];
        let d = dijkstra(&g, start, None, |e| *e.weight());
        d.into_iter().map(|(k, v)| (g[k], SimTime(v))).collect()
    }

    /// One-way latency between two hosts along the path through `side`.
    pub fn host_path_latency(&self, src: HostId, dst: HostId, side: VnSide) -> Option<SimTime> {
        let d = self.distances(self.host_node(src), side);
        d.get(&self.host_node(dst)).copied()
    }

    /// One-way latency between two gateway switches through `side`.
    pub fn gateway_path_latency(&self, a: NodeId, b: NodeId, side: VnSide) -> Option<SimTime> {
        self.distances(a, side).get(&b).copied()
    }

    /// Largest one-way latency between any two traffic entry points
    /// (gateways, or hosts when there are none) through `side`.
    pub fn max_path_latency(&self, side: VnSide) -> SimTime {
        let points: Vec<NodeId> = if self.gateways.is_empty() {
            self.hosts.clone()
        } else {
            self.gateways.iter().map(|g| g.node).collect()
        };
        let mut max = SimTime::ZERO;
        for &a in &points {
            let d = self.distances(a, side);
            for &b in &points {
                if a != b {
                    if let Some(t) = d.get(&b) {
                        max = max.max(*t);
                    }
                }
            }
        }
        max
    }
}
