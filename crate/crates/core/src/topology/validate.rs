use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::model::*;
use crate::simengine::SimTime;

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Diagnostic {
    NonPositiveLatency { a: Endpoint, b: Endpoint },
    DuplicatePort { node: NodeId, port: PortNo },
    DanglingLink { endpoint: Endpoint },
    UnplacedSwitch { node: NodeId },
    UnmappedSwitch { dpid: Dpid },
    SwitchMapNotBijective { new_dpid: Dpid },
    UnmappedPort { dpid: Dpid, port: PortNo },
    PortMapNotBijective { dpid: Dpid, detail: String },
    VnSizeMismatch { old: (usize, usize), new: (usize, usize) },
    EdgeNotPreserved { a: Dpid, b: Dpid },
    GatewayPorts { gateway: NodeId, detail: String },
    VlanMembership { endpoint: Endpoint, detail: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Diagnostic::*;
        match self {
            NonPositiveLatency { a, b } => write!(f, "link {a} <-> {b} has non-positive latency"),
            DuplicatePort { node, port } => write!(f, "node {node} declares port {port} twice"),
            DanglingLink { endpoint } => write!(f, "link endpoint {endpoint} is not a declared port"),
            UnplacedSwitch { node } => write!(f, "virtual switch {node} is not placed on a machine"),
            UnmappedSwitch { dpid } => write!(f, "old-VN datapath {dpid} has no mapping"),
            SwitchMapNotBijective { new_dpid } => {
                write!(f, "new-VN datapath {new_dpid} is not mapped exactly once")
            }
            UnmappedPort { dpid, port } => write!(f, "port {port} of datapath {dpid} has no mapping"),
            PortMapNotBijective { dpid, detail } => write!(f, "port map of {dpid}: {detail}"),
            VnSizeMismatch { old, new } => write!(
                f,
                "old VN has {} switches/{} links, new VN has {}/{}",
                old.0, old.1, new.0, new.1
            ),
            EdgeNotPreserved { a, b } => write!(f, "old-VN link {a}-{b} has no mapped counterpart"),
            GatewayPorts { gateway, detail } => write!(f, "gateway {gateway}: {detail}"),
            VlanMembership { endpoint, detail } => write!(f, "VLAN member {endpoint}: {detail}"),
        }
    }
}

/// Checks every structural invariant of a scenario. Empty output means well-formed.
pub fn validate(t: &ScenarioTopology) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_nodes_and_links(t, &mut out);
    check_mapping(t, &mut out);
    check_isomorphism(t, &mut out);
    check_gateways(t, &mut out);
    check_vlans(t, &mut out);
    out
}

fn check_nodes_and_links(t: &ScenarioTopology, out: &mut Vec<Diagnostic>) {
    for n in &t.nodes {
        let mut seen = BTreeSet::new();
        for p in &n.ports {
            if !seen.insert(p.no) {
                out.push(Diagnostic::DuplicatePort { node: n.id, port: p.no });
            }
        }
        if matches!(n.role, NodeRole::VnSwitch { .. }) && n.machine.is_none() {
            out.push(Diagnostic::UnplacedSwitch { node: n.id });
        }
    }
    for l in &t.substrate_links {
        if l.latency == SimTime::ZERO {
            out.push(Diagnostic::NonPositiveLatency { a: l.a, b: l.b });
        }
        for ep in [l.a, l.b] {
            let ok = t.nodes.get(ep.node.0 as usize).is_some_and(|n| n.has_port(ep.port));
            if !ok {
                out.push(Diagnostic::DanglingLink { endpoint: ep });
            }
        }
    }
}

fn ports_of(t: &ScenarioTopology, dpid: Dpid) -> BTreeSet<PortNo> {
    t.node_by_dpid(dpid)
        .map(|n| t.node(n).ports.iter().map(|p| p.no).collect())
        .unwrap_or_default()
}

fn check_mapping(t: &ScenarioTopology, out: &mut Vec<Diagnostic>) {
    let old = t.vn(VnSide::Old);
    let new = t.vn(VnSide::New);
    let new_set: BTreeSet<Dpid> = new.dpids.iter().copied().collect();

    let mut image: BTreeMap<Dpid, usize> = BTreeMap::new();
    for &d in &old.dpids {
        match t.mapping.map_switch(d) {
            None => out.push(Diagnostic::UnmappedSwitch { dpid: d }),
            Some(n) => *image.entry(n).or_default() += 1,
        }
    }
    for &n in &new_set {
        if image.get(&n).copied().unwrap_or(0) > 1 {
            out.push(Diagnostic::SwitchMapNotBijective { new_dpid: n });
        }
    }
    for n in image.keys() {
        if !new_set.contains(n) {
            out.push(Diagnostic::SwitchMapNotBijective { new_dpid: *n });
        }
    }

    for &d in &old.dpids {
        let Some(nd) = t.mapping.map_switch(d) else { continue };
        let old_ports = ports_of(t, d);
        let new_ports = ports_of(t, nd);
        let mut hit = BTreeSet::new();
        for &p in &old_ports {
            match t.mapping.map_port(d, p) {
                None => out.push(Diagnostic::UnmappedPort { dpid: d, port: p }),
                Some(np) => {
                    if !new_ports.contains(&np) {
                        out.push(Diagnostic::PortMapNotBijective {
                            dpid: d,
                            detail: format!("{p} maps to missing port {np} on {nd}"),
                        });
                    } else if !hit.insert(np) {
                        out.push(Diagnostic::PortMapNotBijective {
                            dpid: d,
                            detail: format!("new port {np} is hit twice"),
                        });
                    }
                }
            }
        }
        if hit.len() == old_ports.len() && old_ports.len() != new_ports.len() {
            out.push(Diagnostic::PortMapNotBijective {
                dpid: d,
                detail: format!("{} old ports vs {} new ports", old_ports.len(), new_ports.len()),
            });
        }
    }
}

fn check_isomorphism(t: &ScenarioTopology, out: &mut Vec<Diagnostic>) {
    let old = t.vn(VnSide::Old);
    let new = t.vn(VnSide::New);
    let size = |v: &VirtualNetwork| (v.switches.len(), v.edges.len());
    if size(old) != size(new) {
        out.push(Diagnostic::VnSizeMismatch { old: size(old), new: size(new) });
    }
    let new_edges: BTreeSet<(Dpid, PortNo, Dpid, PortNo)> = new
        .edges
        .iter()
        .flat_map(|e| {
            let (a, b) = (new.dpids[e.a], new.dpids[e.b]);
            [(a, e.port_a, b, e.port_b), (b, e.port_b, a, e.port_a)]
        })
        .collect();
    for e in &old.edges {
        let (a, b) = (old.dpids[e.a], old.dpids[e.b]);
        // Unmapped endpoints are already reported by the mapping check.
        let (Some(na), Some(nb)) = (t.mapping.map_switch(a), t.mapping.map_switch(b)) else {
            continue;
        };
        let (Some(pa), Some(pb)) = (t.mapping.map_port(a, e.port_a), t.mapping.map_port(b, e.port_b)) else {
            continue;
        };
        if !new_edges.contains(&(na, pa, nb, pb)) {
            out.push(Diagnostic::EdgeNotPreserved { a, b });
        }
    }
}

/// Which VN a gateway port leads into, following bridges and rack switches.
fn leads_to(t: &ScenarioTopology, wiring: &BTreeMap<Endpoint, (usize, Endpoint)>, from: Endpoint) -> Option<VnSide> {
    let mut at = from;
    for _ in 0..4 {
        let (_, far) = wiring.get(&at)?;
        match &t.node(far.node).role {
            NodeRole::VnSwitch { side, .. } => return Some(*side),
            NodeRole::Bridge { .. } => {
                let other = t.node(far.node).ports.iter().find(|p| p.no != far.port)?;
                at = Endpoint::new(far.node, other.no);
            }
            NodeRole::RackSwitch { .. } => {
                let v = t.shared_vlans.iter().find(|v| v.hub_node == far.node)?;
                let sides: BTreeSet<VnSide> = v
                    .members
                    .iter()
                    .filter_map(|m| match t.node(m.node).role {
                        NodeRole::VnSwitch { side, .. } => Some(side),
                        _ => None,
                    })
                    .collect();
                return if sides.len() == 1 { sides.into_iter().next() } else { None };
            }
            _ => return None,
        }
    }
    None
}

fn check_gateways(t: &ScenarioTopology, out: &mut Vec<Diagnostic>) {
    let wiring = t.wiring();
    for g in &t.gateways {
        let node = t.node(g.node);
        let mut bad = |detail: String| out.push(Diagnostic::GatewayPorts { gateway: g.node, detail });
        if node.ports.len() != 3 {
            bad(format!("expected 3 ports, found {}", node.ports.len()));
        }
        let host_side = wiring.get(&Endpoint::new(g.node, g.host_port));
        match host_side.map(|(_, far)| &t.node(far.node).role) {
            Some(NodeRole::Host { .. }) => {}
            _ => bad(format!("host port {} does not reach a host", g.host_port)),
        }
        if leads_to(t, &wiring, Endpoint::new(g.node, g.old_port)) != Some(VnSide::Old) {
            bad(format!("port {} does not lead into the old VN", g.old_port));
        }
        if leads_to(t, &wiring, Endpoint::new(g.node, g.new_port)) != Some(VnSide::New) {
            bad(format!("port {} does not lead into the new VN", g.new_port));
        }
    }
}

fn check_vlans(t: &ScenarioTopology, out: &mut Vec<Diagnostic>) {
    let wiring = t.wiring();
    let mut owner: BTreeMap<Endpoint, u16> = BTreeMap::new();
    for v in &t.shared_vlans {
        for m in &v.members {
            if let Some(prev) = owner.insert(*m, v.vlan_id) {
                out.push(Diagnostic::VlanMembership {
                    endpoint: *m,
                    detail: format!("member of both VLAN {prev} and VLAN {}", v.vlan_id),
                });
            }
            let reaches_hub = wiring.get(m).is_some_and(|(_, far)| far.node == v.hub_node);
            if !reaches_hub {
                out.push(Diagnostic::VlanMembership {
                    endpoint: *m,
                    detail: format!("not wired to the rack switch of VLAN {}", v.vlan_id),
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_cross_aggregate_scenario, build_gateway_scenario, build_shared_vlan_scenario, Latencies, VnShape};
    use proptest::prelude::*;

    fn sample() -> ScenarioTopology {
        build_gateway_scenario(3, &VnShape::line(3), &Latencies::uniform(SimTime::from_millis(5)), 11).unwrap()
    }

    #[test]
    fn well_formed_gateway_topology() {
        assert_eq!(validate(&sample()), vec![]);
    }

    #[test]
    fn well_formed_other_layouts() {
        let lat = Latencies::uniform(SimTime::from_millis(2));
        let c = build_cross_aggregate_scenario(3, &VnShape::ring(3), &lat, 4).unwrap();
        assert_eq!(validate(&c), vec![]);
        let s = build_shared_vlan_scenario(3, &VnShape::line(2), &lat, 4).unwrap();
        assert_eq!(validate(&s), vec![]);
    }

    #[test]
    fn missing_switch_mapping_names_the_datapath() {
        let mut t = sample();
        let victim = t.vn(VnSide::Old).dpids[1];
        t.mapping.remove_switch(victim);
        assert_eq!(validate(&t), vec![Diagnostic::UnmappedSwitch { dpid: victim }]);
    }

    #[test]
    fn zero_latency_link_is_reported_once() {
        let mut t = sample();
        t.substrate_links[0].latency = SimTime::ZERO;
        let d = validate(&t);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], Diagnostic::NonPositiveLatency { .. }));
    }

    #[test]
    fn missing_port_mapping_is_reported() {
        let mut t = sample();
        let dpid = t.vn(VnSide::Old).dpids[0];
        t.mapping.remove_port(dpid, PortNo(1));
        let d = validate(&t);
        assert!(d.contains(&Diagnostic::UnmappedPort { dpid, port: PortNo(1) }));
    }

    #[test]
    fn vlan_member_in_two_vlans() {
        let mut t = sample();
        let stolen = *t.shared_vlans[0].members.iter().next().unwrap();
        t.shared_vlans[1].members.insert(stolen);
        let d = validate(&t);
        assert!(d.iter().any(|x| matches!(x, Diagnostic::VlanMembership { endpoint, .. } if *endpoint == stolen)));
    }

    #[test]
    fn gateway_with_swapped_ports_is_reported() {
        let mut t = sample();
        let g = &mut t.gateways[0];
        std::mem::swap(&mut g.old_port, &mut g.new_port);
        assert_eq!(validate(&t).len(), 2);
    }

    proptest! {
        #[test]
        fn every_seed_builds_a_valid_gateway_topology(
            seed in any::<u64>(),
            hosts in 2usize..6,
            switches in 1usize..7,
            extra in proptest::collection::vec((0usize..7, 0usize..7), 0..4),
        ) {
            let mut shape = VnShape::line(switches);
            for (a, b) in extra {
                let (a, b) = (a % switches, b % switches);
                if a != b && !shape.links.iter().any(|&(x, y)| (x.min(y), x.max(y)) == (a.min(b), a.max(b))) {
                    shape.links.push((a, b));
                }
            }
            let t = build_gateway_scenario(hosts, &shape, &Latencies::uniform(SimTime::from_millis(3)), seed).unwrap();
            prop_assert_eq!(validate(&t), vec![]);
        }
    }
}
