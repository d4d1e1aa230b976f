//! Oracles shared by the integration tests. Nothing here calls into the
//! code under test beyond plain data accessors.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnmig::dataplane::{Action, FlowRule, FlowTable, Lookup, Match, Packet, SwitchRole, SwitchState};
use vnmig::simengine::{FlowId, SimTime};
use vnmig::topology::{Dpid, HostId, PortNo, ScenarioTopology, VnShape, VnSide};

/// Fractional packets lost by the flow whose sender's gateway switches
/// `lead_ms` before the receiver's gateway, over one-way latency `d_ms`.
pub fn oracle_one_way(lead_ms: f64, d_ms: f64, rate_pps: f64) -> f64 {
    // Old-VN packets sent in [t_recv - d, t_send) arrive after the receiver
    // stopped accepting them; new-VN packets sent in [t_send, t_recv - d)
    // arrive before it started.
    let window = if lead_ms >= d_ms { lead_ms - d_ms } else { d_ms - lead_ms };
    window * rate_pps / 1000.0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Delivered(BTreeSet<HostId>),
    Dropped,
    Miss,
    Looped,
}

/// Follows a packet hop by hop through one VN's tables.
pub fn walk(topo: &ScenarioTopology, side: VnSide, tables: &BTreeMap<Dpid, FlowTable>, src: HostId, dst: HostId) -> Outcome {
    let vn = topo.vn(side);
    let Some(start) = vn.attachments.iter().find(|a| a.host == src) else { return Outcome::Dropped };
    let packet = Packet { id: 0, flow: FlowId(0), seq: 0, src, dst };
    let (mut at, mut in_port) = (start.switch, start.port);
    for _ in 0..64 {
        let empty = FlowTable::new();
        let table = tables.get(&vn.dpids[at]).unwrap_or(&empty);
        let out = match table.lookup(&packet, in_port, SimTime::ZERO) {
            Lookup::Output(p) => p,
            Lookup::Drop => return Outcome::Dropped,
            Lookup::Miss => return Outcome::Miss,
        };
        let hosts: BTreeSet<HostId> =
            vn.attachments.iter().filter(|a| a.switch == at && a.port == out).map(|a| a.host).collect();
        if !hosts.is_empty() {
            return Outcome::Delivered(hosts);
        }
        let next = vn.edges.iter().find_map(|e| {
            if e.a == at && e.port_a == out {
                Some((e.b, e.port_b))
            } else if e.b == at && e.port_b == out {
                Some((e.a, e.port_a))
            } else {
                None
            }
        });
        match next {
            Some((n, p)) => (at, in_port) = (n, p),
            None => return Outcome::Dropped,
        }
    }
    Outcome::Looped
}

fn bfs_path(n: usize, adj: &[Vec<(usize, PortNo, PortNo)>], from: usize, to: usize) -> Vec<(usize, PortNo)> {
    // Returns (switch, out port) per hop.
    let mut prev: Vec<Option<(usize, PortNo)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut q = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = q.pop_front() {
        for &(v, pu, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                prev[v] = Some((u, pu));
                q.push_back(v);
            }
        }
    }
    let mut hops = Vec::new();
    let mut cur = to;
    while cur != from {
        let (p, port) = prev[cur].expect("connected");
        hops.push((p, port));
        cur = p;
    }
    hops.reverse();
    hops
}

/// Old-VN switches loaded with shortest-path rules for every host pair and
/// `noise` random rules each.
pub fn populate_old_vn(topo: &ScenarioTopology, noise: usize, seed: u64) -> Vec<SwitchState> {
    let vn = topo.vn(VnSide::Old);
    let n = vn.switches.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states: Vec<SwitchState> = vn
        .switches
        .iter()
        .map(|&id| {
            let node = topo.node(id);
            SwitchState::new(id, node.dpid, SwitchRole::VnSwitch, node.ports.iter().map(|p| (p.no, true)), 10)
        })
        .collect();
    let mut adj = vec![Vec::new(); n];
    for e in &vn.edges {
        adj[e.a].push((e.b, e.port_a, e.port_b));
        adj[e.b].push((e.a, e.port_b, e.port_a));
    }
    for s in &vn.attachments {
        for d in &vn.attachments {
            if s.host == d.host {
                continue;
            }
            let mut in_port = s.port;
            let mut cur = s.switch;
            for (sw, out) in bfs_path(n, &adj, s.switch, d.switch) {
                let m = Match { in_port: rng.random_bool(0.5).then_some(in_port), src: Some(s.host), dst: Some(d.host) };
                states[sw].table.install(FlowRule::new(10, m, Action::Output(out)));
                let (next, p) = adj[sw].iter().find(|(_, po, _)| *po == out).map(|&(v, _, pb)| (v, pb)).unwrap();
                cur = next;
                in_port = p;
            }
            let m = Match { in_port: Some(in_port), src: Some(s.host), dst: Some(d.host) };
            states[cur].table.install(FlowRule::new(10, m, Action::Output(d.port)));
        }
    }
    let hosts: Vec<HostId> = vn.attachments.iter().map(|a| a.host).collect();
    for st in &mut states {
        let ports: Vec<PortNo> = st.ports.keys().copied().collect();
        for _ in 0..noise {
            let pick_host = |rng: &mut ChaCha8Rng| rng.random_bool(0.6).then(|| hosts[rng.random_range(0..hosts.len())]);
            let m = Match {
                in_port: rng.random_bool(0.5).then(|| ports[rng.random_range(0..ports.len())]),
                src: pick_host(&mut rng),
                dst: pick_host(&mut rng),
            };
            let action =
                if rng.random_bool(0.3) { Action::Drop } else { Action::Output(ports[rng.random_range(0..ports.len())]) };
            st.table.install(FlowRule::new(rng.random_range(1..200), m, action));
        }
    }
    states
}

/// Connected random graph on `n` switches: a random spanning tree plus extra edges.
pub fn random_shape(n: usize, extra: usize, seed: u64) -> VnShape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links = BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        links.insert((u, v));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            links.insert((a.min(b), a.max(b)));
        }
    }
    VnShape { switches: n, links: links.into_iter().collect(), attach: None }
}

pub fn star(n: usize) -> VnShape {
    VnShape { switches: n, links: (1..n).map(|i| (0, i)).collect(), attach: None }
}
