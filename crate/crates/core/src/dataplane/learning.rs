use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::flow::{Action, FlowMod, FlowRule, Match};
use super::Packet;
use crate::simengine::SimTime;
use crate::topology::{Dpid, HostId, PortNo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    /// How long a source is blackholed after it shows up on a second port.
    pub drop_duration: SimTime,
    /// Hard timeout on learned forwarding rules; `None` keeps them forever.
    pub rule_ttl: Option<SimTime>,
    pub forward_priority: u16,
    /// Must outrank `forward_priority`.
    pub drop_priority: u16,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            drop_duration: SimTime::from_secs(5),
            rule_ttl: Some(SimTime::from_secs(2)),
            forward_priority: 10,
            drop_priority: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Forward {
    Port(PortNo),
    Flood,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppDecision {
    pub flow_mods: Vec<FlowMod>,
    pub forward: Forward,
    /// Set when the packet's source was already known on another port.
    pub conflict: bool,
}

/// Learned host locations for one switch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacTable {
    learned: BTreeMap<HostId, PortNo>,
}

impl MacTable {
    pub fn location(&self, host: HostId) -> Option<PortNo> {
        self.learned.get(&host).copied()
    }

    pub fn learn(&mut self, host: HostId, port: PortNo) {
        self.learned.insert(host, port);
    }

    pub fn len(&self) -> usize {
        self.learned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.learned.is_empty()
    }

    /// Handles a table-miss packet.
    ///
    /// A source seen on a port other than the one it was learned on is
    /// treated as a conflicting replay: the entry is forgotten and every
    /// packet from that source is dropped until `drop_duration` elapses.
    pub fn handle(&mut self, cfg: &LearningConfig, packet: &Packet, in_port: PortNo, now: SimTime) -> AppDecision {
        if let Some(prev) = self.location(packet.src) {
            if prev != in_port {
                self.learned.remove(&packet.src);
                let rule = FlowRule::new(cfg.drop_priority, Match::src(packet.src), Action::Drop)
                    .expiring_at(now + cfg.drop_duration);
                return AppDecision { flow_mods: vec![FlowMod::install(rule)], forward: Forward::Drop, conflict: true };
            }
        }
        self.learn(packet.src, in_port);

        match self.location(packet.dst) {
            Some(out) if out == in_port => {
                AppDecision { flow_mods: Vec::new(), forward: Forward::Drop, conflict: false }
            }
            Some(out) => {
                let mut rule = FlowRule::new(
                    cfg.forward_priority,
                    Match { in_port: Some(in_port), src: Some(packet.src), dst: Some(packet.dst) },
                    Action::Output(out),
                );
                rule.expiry = cfg.rule_ttl.map(|ttl| now + ttl);
                AppDecision { flow_mods: vec![FlowMod::install(rule)], forward: Forward::Port(out), conflict: false }
            }
            None => AppDecision { flow_mods: Vec::new(), forward: Forward::Flood, conflict: false },
        }
    }
}

/// The client learning-switch application: one MAC table per datapath it sees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningSwitch {
    pub config: LearningConfig,
    tables: BTreeMap<Dpid, MacTable>,
    conflicts: u64,
}

impl LearningSwitch {
    pub fn new(config: LearningConfig) -> Self {
        LearningSwitch { config, tables: BTreeMap::new(), conflicts: 0 }
    }

    pub fn table(&self, dpid: Dpid) -> Option<&MacTable> {
        self.tables.get(&dpid)
    }

    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    pub fn handle(&mut self, dpid: Dpid, packet: &Packet, in_port: PortNo, now: SimTime) -> AppDecision {
        let d = self.tables.entry(dpid).or_default().handle(&self.config, packet, in_port, now);
        if d.conflict {
            self.conflicts += 1;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataplane::{Lookup, SwitchRole, SwitchState};
    use crate::simengine::FlowId;
    use crate::topology::NodeId;

    fn pkt(seq: u64, src: u32, dst: u32) -> Packet {
        Packet { id: seq, flow: FlowId(0), seq, src: HostId(src), dst: HostId(dst) }
    }

    #[test]
    fn unknown_destination_floods_and_learns() {
        let mut t = MacTable::default();
        let d = t.handle(&LearningConfig::default(), &pkt(0, 0, 1), PortNo(1), SimTime::ZERO);
        assert_eq!(d.forward, Forward::Flood);
        assert!(d.flow_mods.is_empty());
        assert_eq!(t.location(HostId(0)), Some(PortNo(1)));
    }

    #[test]
    fn known_destination_installs_forwarding_rule() {
        let cfg = LearningConfig::default();
        let mut t = MacTable::default();
        t.handle(&cfg, &pkt(0, 1, 0), PortNo(2), SimTime::ZERO);
        let d = t.handle(&cfg, &pkt(1, 0, 1), PortNo(1), SimTime::from_millis(1));
        assert_eq!(d.forward, Forward::Port(PortNo(2)));
        let FlowMod::Install { rule } = d.flow_mods[0] else { panic!() };
        assert_eq!(rule.action, Action::Output(PortNo(2)));
        assert_eq!(rule.expiry, Some(SimTime::from_millis(2_001)));
    }

    #[test]
    fn source_on_second_port_triggers_timed_drop() {
        let cfg = LearningConfig::default();
        let mut t = MacTable::default();
        t.handle(&cfg, &pkt(0, 0, 1), PortNo(1), SimTime::ZERO);
        let d = t.handle(&cfg, &pkt(1, 0, 1), PortNo(2), SimTime::from_secs(1));
        assert!(d.conflict);
        assert_eq!(d.forward, Forward::Drop);
        let FlowMod::Install { rule } = d.flow_mods[0] else { panic!() };
        assert_eq!(rule.matcher, Match::src(HostId(0)));
        assert_eq!(rule.action, Action::Drop);
        assert_eq!(rule.expiry, Some(SimTime::from_secs(6)));
    }

    /// Drives a switch table plus the app through a replay and checks the
    /// outage ends exactly at `drop_duration` after the conflict.
    #[test]
    fn replay_outage_recovers_at_drop_expiry() {
        let cfg = LearningConfig { rule_ttl: None, ..LearningConfig::default() };
        let mut app = LearningSwitch::new(cfg.clone());
        let mut sw = SwitchState::new(
            NodeId(0),
            Some(Dpid(1)),
            SwitchRole::VnSwitch,
            [(PortNo(1), true), (PortNo(2), true), (PortNo(3), true)],
            0,
        );
        let dpid = Dpid(1);
        // h2 lives on port 3; h1 first shows up on port 1.
        let step = |sw: &mut SwitchState, app: &mut LearningSwitch, p: Packet, port: u16, t: SimTime| -> bool {
            match sw.table.lookup(&p, PortNo(port), t) {
                Lookup::Output(_) => true,
                Lookup::Drop => false,
                Lookup::Miss => {
                    let d = app.handle(dpid, &p, PortNo(port), t);
                    for m in &d.flow_mods {
                        sw.apply_flow_mod(m).unwrap();
                    }
                    !matches!(d.forward, Forward::Drop)
                }
            }
        };
        assert!(step(&mut sw, &mut app, pkt(0, 1, 0), 3, SimTime::ZERO));
        assert!(step(&mut sw, &mut app, pkt(1, 0, 1), 1, SimTime::from_millis(10)));
        // Replay of h1 on port 2 at t = 1 s.
        let conflict_at = SimTime::from_secs(1);
        assert!(!step(&mut sw, &mut app, pkt(2, 0, 1), 2, conflict_at));
        let mut first_ok = None;
        for k in 1..=80u64 {
            let t = conflict_at + SimTime::from_millis(100 * k);
            if step(&mut sw, &mut app, pkt(2 + k, 0, 1), 2, t) && first_ok.is_none() {
                first_ok = Some(t);
            }
        }
        assert_eq!(first_ok, Some(conflict_at + cfg.drop_duration));
        assert_eq!(app.table(dpid).unwrap().location(HostId(0)), Some(PortNo(2)));
        assert_eq!(app.conflicts(), 1);
    }
}
