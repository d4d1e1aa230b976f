use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::flow::{FlowMod, FlowTable};
use super::Packet;
use crate::topology::{Dpid, Endpoint, NodeId, PortNo, SharedVlan};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataplaneError {
    #[error("switch {dpid} has no port {port}")]
    NoSuchPort { dpid: String, port: PortNo },
}

/// Dom0-side queue for one virtual interface. Holds packets while the
/// interface is administratively down and releases them in FIFO order on up.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypervisorBuffer {
    capacity: usize,
    queue: VecDeque<Packet>,
    offered: u64,
    discarded: u64,
}

impl HypervisorBuffer {
    pub fn new(capacity: usize) -> Self {
        HypervisorBuffer { capacity, ..Default::default() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn offered(&self) -> u64 {
        self.offered
    }

    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    /// Enqueues unless full; returns whether the packet was kept.
    pub fn offer(&mut self, packet: Packet) -> bool {
        self.offered += 1;
        if self.queue.len() < self.capacity {
            self.queue.push_back(packet);
            true
        } else {
            self.discarded += 1;
            false
        }
    }

    pub fn drain(&mut self) -> Vec<Packet> {
        self.queue.drain(..).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortState {
    pub admin_up: bool,
    pub buffer: HypervisorBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchRole {
    Gateway,
    VnSwitch,
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AppKind {
    LearningSwitch,
    None,
}

/// What happened to a packet arriving on a port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingress {
    Accepted,
    Buffered,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchState {
    pub node: NodeId,
    pub dpid: Option<Dpid>,
    pub role: SwitchRole,
    pub app: AppKind,
    pub ports: BTreeMap<PortNo, PortState>,
    pub table: FlowTable,
    /// Whether the controller can reach this switch.
    pub reachable: bool,
}

impl SwitchState {
    pub fn new(
        node: NodeId,
        dpid: Option<Dpid>,
        role: SwitchRole,
        ports: impl IntoIterator<Item = (PortNo, bool)>,
        buffer_capacity: usize,
    ) -> Self {
        let app = match role {
            SwitchRole::VnSwitch => AppKind::LearningSwitch,
            _ => AppKind::None,
        };
        SwitchState {
            node,
            dpid,
            role,
            app,
            ports: ports
                .into_iter()
                .map(|(p, up)| (p, PortState { admin_up: up, buffer: HypervisorBuffer::new(buffer_capacity) }))
                .collect(),
            table: FlowTable::new(),
            reachable: true,
        }
    }

    fn label(&self) -> String {
        self.dpid.map_or_else(|| self.node.to_string(), |d| d.to_string())
    }

    fn require_port(&self, port: PortNo) -> Result<(), DataplaneError> {
        if self.ports.contains_key(&port) {
            Ok(())
        } else {
            Err(DataplaneError::NoSuchPort { dpid: self.label(), port })
        }
    }

    pub fn is_port_up(&self, port: PortNo) -> bool {
        self.ports.get(&port).is_some_and(|p| p.admin_up)
    }

    /// Applies a flow-mod and returns how many rules it touched.
    pub fn apply_flow_mod(&mut self, m: &FlowMod) -> Result<usize, DataplaneError> {
        match m {
            FlowMod::Install { rule } => {
                if let Some(p) = rule.matcher.in_port {
                    self.require_port(p)?;
                }
                if let Some(p) = rule.action.out_port() {
                    self.require_port(p)?;
                }
                Ok(self.table.install(*rule))
            }
            FlowMod::Update { predicate, action } => {
                if let Some(p) = action.out_port() {
                    self.require_port(p)?;
                }
                Ok(self.table.update(predicate, *action))
            }
            FlowMod::Delete { predicate } => Ok(self.table.delete(predicate)),
        }
    }

    /// Changes a port's admin state. On a down-to-up transition the dom0
    /// buffer is flushed; the caller delivers those packets before any new traffic.
    pub fn set_interface_admin(&mut self, port: PortNo, up: bool) -> Result<Vec<Packet>, DataplaneError> {
        self.require_port(port)?;
        let st = self.ports.get_mut(&port).expect("checked");
        let was_up = st.admin_up;
        st.admin_up = up;
        if up && !was_up {
            Ok(st.buffer.drain())
        } else {
            Ok(Vec::new())
        }
    }

    /// Receives a packet from the wire; admin-down interfaces buffer it in dom0.
    pub fn ingress(&mut self, port: PortNo, packet: Packet) -> Ingress {
        match self.ports.get_mut(&port) {
            Some(st) if st.admin_up => Ingress::Accepted,
            Some(st) => {
                if st.buffer.offer(packet) {
                    Ingress::Buffered
                } else {
                    Ingress::Discarded
                }
            }
            None => Ingress::Discarded,
        }
    }
}

/// Per-member outcome of one VLAN broadcast.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VlanOutcome {
    pub delivered: Vec<Endpoint>,
    pub buffered: Vec<Endpoint>,
    pub discarded: Vec<Endpoint>,
}

/// Anything that can resolve a VLAN member to its switch state.
/// Members without switch state (host NICs) always accept.
pub trait InterfaceTable {
    fn switch_at(&mut self, node: NodeId) -> Option<&mut SwitchState>;
}

impl InterfaceTable for BTreeMap<NodeId, SwitchState> {
    fn switch_at(&mut self, node: NodeId) -> Option<&mut SwitchState> {
        self.get_mut(&node)
    }
}

/// Broadcasts `packet` from `origin` to every other member of `vlan`.
/// Admin-down members keep the packet in their dom0 buffer instead.
pub fn vlan_deliver(
    vlan: &SharedVlan,
    packet: Packet,
    origin: Endpoint,
    switches: &mut impl InterfaceTable,
) -> VlanOutcome {
    let mut out = VlanOutcome::default();
    for member in vlan.delivery_set(origin) {
        let verdict = match switches.switch_at(member.node) {
            Some(sw) => sw.ingress(member.port, packet),
            None => Ingress::Accepted,
        };
        match verdict {
            Ingress::Accepted => out.delivered.push(member),
            Ingress::Buffered => out.buffered.push(member),
            Ingress::Discarded => out.discarded.push(member),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataplane::flow::{Action, FlowRule, Match, RulePredicate};
    use crate::simengine::FlowId;
    use crate::topology::HostId;

    fn pkt(seq: u64) -> Packet {
        Packet { id: seq, flow: FlowId(0), seq, src: HostId(0), dst: HostId(1) }
    }

    fn gateway() -> SwitchState {
        let mut sw = SwitchState::new(
            NodeId(0),
            Some(Dpid(0x300)),
            SwitchRole::Gateway,
            [(PortNo(1), true), (PortNo(2), true), (PortNo(3), true)],
            10,
        );
        sw.table.install(FlowRule::new(10, Match::in_port(PortNo(1)), Action::Output(PortNo(2))));
        sw.table.install(FlowRule::new(10, Match::in_port(PortNo(2)), Action::Output(PortNo(1))));
        sw.table.install(FlowRule::new(10, Match::in_port(PortNo(3)), Action::Drop));
        sw
    }

    #[test]
    fn install_on_empty_table_counts_one() {
        let mut sw = SwitchState::new(NodeId(0), None, SwitchRole::VnSwitch, [(PortNo(1), true), (PortNo(2), true)], 0);
        let n = sw
            .apply_flow_mod(&FlowMod::install(FlowRule::new(1, Match::in_port(PortNo(1)), Action::Output(PortNo(2)))))
            .unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn redirect_update_touches_the_host_rule_only() {
        let mut sw = gateway();
        let m = FlowMod::Update {
            predicate: RulePredicate { in_port: Some(PortNo(1)), out_port: Some(PortNo(2)), ..Default::default() },
            action: Action::Output(PortNo(3)),
        };
        assert_eq!(sw.apply_flow_mod(&m).unwrap(), 1);
        assert_eq!(sw.table.lookup(&pkt(0), PortNo(1), crate::simengine::SimTime::ZERO), super::super::Lookup::Output(PortNo(3)));
    }

    #[test]
    fn delete_of_unknown_port_counts_zero() {
        let mut sw = gateway();
        let m = FlowMod::Delete { predicate: RulePredicate { in_port: Some(PortNo(99)), ..Default::default() } };
        assert_eq!(sw.apply_flow_mod(&m).unwrap(), 0);
    }

    #[test]
    fn install_referencing_missing_port_is_rejected() {
        let mut sw = gateway();
        let bad = FlowMod::install(FlowRule::new(10, Match::in_port(PortNo(1)), Action::Output(PortNo(9))));
        assert_eq!(
            sw.apply_flow_mod(&bad).unwrap_err(),
            DataplaneError::NoSuchPort { dpid: "0x300".into(), port: PortNo(9) }
        );
        assert_eq!(sw.table.len(), 3);
    }

    #[test]
    fn admin_up_flushes_in_fifo_order() {
        let mut sw = SwitchState::new(NodeId(1), None, SwitchRole::VnSwitch, [(PortNo(1), false)], 10);
        for s in 0..3 {
            assert_eq!(sw.ingress(PortNo(1), pkt(s)), Ingress::Buffered);
        }
        let flushed = sw.set_interface_admin(PortNo(1), true).unwrap();
        assert_eq!(flushed.iter().map(|p| p.seq).collect::<Vec<_>>(), vec![0, 1, 2]);
        // Empty buffer, already up: nothing further.
        assert!(sw.set_interface_admin(PortNo(1), true).unwrap().is_empty());
    }

    #[test]
    fn admin_up_with_empty_buffer_yields_nothing() {
        let mut sw = SwitchState::new(NodeId(1), None, SwitchRole::VnSwitch, [(PortNo(1), false)], 10);
        assert!(sw.set_interface_admin(PortNo(1), true).unwrap().is_empty());
    }

    fn two_member_vlan() -> (SharedVlan, BTreeMap<NodeId, SwitchState>, Endpoint) {
        let host = Endpoint::new(NodeId(0), PortNo(1));
        let eth1 = Endpoint::new(NodeId(1), PortNo(1));
        let eth1p = Endpoint::new(NodeId(2), PortNo(1));
        let vlan = SharedVlan { vlan_id: 100, members: [host, eth1, eth1p].into_iter().collect(), hub_node: NodeId(9) };
        let mut sws = BTreeMap::new();
        sws.insert(NodeId(1), SwitchState::new(NodeId(1), None, SwitchRole::VnSwitch, [(PortNo(1), true)], 10));
        sws.insert(NodeId(2), SwitchState::new(NodeId(2), None, SwitchRole::VnSwitch, [(PortNo(1), false)], 10));
        (vlan, sws, host)
    }

    #[test]
    fn broadcast_delivers_up_and_buffers_down() {
        let (vlan, mut sws, host) = two_member_vlan();
        let out = vlan_deliver(&vlan, pkt(0), host, &mut sws);
        assert_eq!(out.delivered, vec![Endpoint::new(NodeId(1), PortNo(1))]);
        assert_eq!(out.buffered, vec![Endpoint::new(NodeId(2), PortNo(1))]);
        assert!(out.discarded.is_empty());
    }

    #[test]
    fn zero_capacity_buffers_nothing() {
        let (vlan, mut sws, host) = two_member_vlan();
        sws.insert(NodeId(2), SwitchState::new(NodeId(2), None, SwitchRole::VnSwitch, [(PortNo(1), false)], 0));
        let out = vlan_deliver(&vlan, pkt(0), host, &mut sws);
        assert!(out.buffered.is_empty());
        assert_eq!(out.discarded.len(), 1);
    }

    #[test]
    fn fifteen_broadcasts_into_capacity_ten() {
        let (vlan, mut sws, host) = two_member_vlan();
        let (mut buffered, mut discarded) = (0, 0);
        for s in 0..15 {
            let out = vlan_deliver(&vlan, pkt(s), host, &mut sws);
            buffered += out.buffered.len();
            discarded += out.discarded.len();
        }
        assert_eq!((buffered, discarded), (10, 5));
        let b = &sws[&NodeId(2)].ports[&PortNo(1)].buffer;
        // Conservation: everything offered is either held or counted as discarded.
        assert_eq!(b.offered(), b.len() as u64 + b.discarded());
        // Drop-tail keeps the oldest packets.
        let kept: Vec<u64> = sws.get_mut(&NodeId(2)).unwrap().set_interface_admin(PortNo(1), true).unwrap().iter().map(|p| p.seq).collect();
        assert_eq!(kept, (0..10).collect::<Vec<_>>());
    }
}
