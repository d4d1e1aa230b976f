use std::collections::BTreeMap;

use super::migrate::{
    Counters, FlowStats, LoggedEvent, MigrationMetrics, MigrationOptions, MigrationTimeline, Strategy, SwitchOver,
    TraceRecord,
};
use super::presenter::{Presented, PresenterState, SwitchEvent};
use super::schedule::{
    build_redirection_schedule, build_toggle_schedule, execute_schedule, CommandOp, RedirectPoint,
};
use super::tables::{clone_tables, poll_flow_tables, ClonePlan};
use crate::dataplane::{Action as RuleAction, AppKind, FlowMod, FlowRule, Forward, Ingress, LearningSwitch, Lookup, Packet, SwitchRole, SwitchState};
use crate::simengine::rng::{stream, Stream};
use crate::simengine::{Engine, HostFlow, LinkDirection, SimTime, Transmission};
use crate::dataplane::Match;
use crate::topology::{Endpoint, HostId, NodeId, NodeRole, PortNo, ScenarioTopology, VnSide};

#[derive(Debug, Clone)]
pub(crate) enum Action {
    Emit { flow: usize, seq: u64 },
    Arrive { at: Endpoint, packet: Packet },
    Expire { node: NodeId },
    StartMigration,
    CloneInstall { batch: usize },
    Apply { index: usize },
    Activate,
}

#[derive(Debug, Clone, Default)]
struct FlowRx {
    seen: Vec<bool>,
    received: u64,
    duplicates: u64,
    last: Option<SimTime>,
    max_gap: SimTime,
    max_gap_start: Option<SimTime>,
}

struct PortLink {
    link: usize,
    dir: usize,
    far: Endpoint,
}

struct Plan {
    clone: ClonePlan,
    applications: Vec<(NodeId, CommandOp)>,
}

pub(crate) struct World<'a> {
    topo: &'a ScenarioTopology,
    opts: &'a MigrationOptions,
    seed: u64,
    engine: Engine<Action>,
    switches: Vec<Option<SwitchState>>,
    ports: Vec<BTreeMap<PortNo, PortLink>>,
    links: Vec<[LinkDirection; 2]>,
    flood: Vec<Vec<PortNo>>,
    flows: &'a [HostFlow],
    rx: Vec<FlowRx>,
    app: LearningSwitch,
    presenter: PresenterState,
    next_packet: u64,
    counters: Counters,
    log: Vec<LoggedEvent>,
    trace: Vec<TraceRecord>,
    horizon: SimTime,
    plan: Option<Plan>,
    timeline: Option<MigrationTimeline>,
}

impl<'a> World<'a> {
    pub(crate) fn new(topo: &'a ScenarioTopology, flows: &'a [HostFlow], opts: &'a MigrationOptions, seed: u64) -> Self {
        let n = topo.nodes.len();
        let mut switches: Vec<Option<SwitchState>> = (0..n).map(|_| None).collect();
        let mut flood = vec![Vec::new(); n];
        for node in &topo.nodes {
            let role = match node.role {
                NodeRole::Gateway => SwitchRole::Gateway,
                NodeRole::VnSwitch { .. } => SwitchRole::VnSwitch,
                NodeRole::Bridge { .. } => SwitchRole::Bridge,
                _ => continue,
            };
            let ports = node.ports.iter().map(|p| (p.no, p.initially_up));
            switches[node.id.0 as usize] = Some(SwitchState::new(node.id, node.dpid, role, ports, opts.buffer_capacity));
            if let NodeRole::VnSwitch { side, index } = node.role {
                flood[node.id.0 as usize] = topo.vn(side).flood_ports(index).into_iter().collect();
            }
        }

        let mut ports: Vec<BTreeMap<PortNo, PortLink>> = (0..n).map(|_| BTreeMap::new()).collect();
        let mut links = Vec::with_capacity(topo.substrate_links.len());
        for (i, l) in topo.substrate_links.iter().enumerate() {
            ports[l.a.node.0 as usize].insert(l.a.port, PortLink { link: i, dir: 0, far: l.b });
            ports[l.b.node.0 as usize].insert(l.b.port, PortLink { link: i, dir: 1, far: l.a });
            links.push([LinkDirection::new(l.latency, l.capacity_pps), LinkDirection::new(l.latency, l.capacity_pps)]);
        }

        let rx = flows.iter().map(|f| FlowRx { seen: vec![false; f.packet_count() as usize], ..FlowRx::default() }).collect();
        let presenter = PresenterState::new(topo.mapping.clone(), topo.gateways.iter().map(|g| g.dpid));
        let horizon = flows.iter().map(HostFlow::end).max().unwrap_or(SimTime::ZERO);

        World {
            topo,
            opts,
            seed,
            engine: Engine::new(),
            switches,
            ports,
            links,
            flood,
            flows,
            rx,
            app: LearningSwitch::new(opts.learning.clone()),
            presenter,
            next_packet: 0,
            counters: Counters::default(),
            log: Vec::new(),
            trace: Vec::new(),
            horizon,
            plan: None,
            timeline: None,
        }
    }

    fn schedule(&mut self, at: SimTime, action: Action) {
        let at = at.max(self.engine.now());
        self.engine.schedule(at, action).expect("never scheduled in the past");
    }

    fn now(&self) -> SimTime {
        self.engine.now()
    }

    fn sw(&mut self, node: NodeId) -> &mut SwitchState {
        self.switches[node.0 as usize].as_mut().expect("node is a switch")
    }

    fn trace(&mut self, kind: &str, node: NodeId, port: Option<PortNo>, packet: Option<&Packet>) {
        if self.opts.record_trace {
            self.trace.push(TraceRecord {
                time: self.now(),
                kind: kind.to_string(),
                node,
                port,
                packet: packet.map(|p| p.id),
            });
        }
    }

    fn present(&mut self, event: SwitchEvent) -> Option<SwitchEvent> {
        match self.presenter.translate(&event) {
            Presented::Deliver(e) => {
                if self.opts.record_events {
                    self.log.push(LoggedEvent { time: self.now(), event: e.clone() });
                }
                Some(e)
            }
            Presented::Suppressed(_) => None,
        }
    }

    fn setup(&mut self) {
        let topo = self.topo;
        for node in &topo.nodes {
            if let Some(dpid) = node.dpid {
                self.present(SwitchEvent::SwitchJoin { dpid });
            }
        }
        for p in RedirectPoint::gateways(topo) {
            let sw = self.sw(p.node);
            for r in p.initial_rules() {
                sw.table.install(r);
            }
        }
        let synthetic = self.opts.synthetic_rules;
        if synthetic > 0 {
            for &node in &topo.vn(VnSide::Old).switches {
                let ports: Vec<PortNo> = topo.node(node).ports.iter().map(|p| p.no).collect();
                let sw = self.sw(node);
                for k in 0..synthetic {
                    let inp = ports[k % ports.len()];
                    let action = match ports.get((k + 1) % ports.len()) {
                        Some(&q) if q != inp => RuleAction::Output(q),
                        _ => RuleAction::Drop,
                    };
                    sw.table.install(FlowRule::new(
                        1,
                        Match { in_port: Some(inp), src: Some(HostId(1_000_000 + k as u32)), dst: None },
                        action,
                    ));
                }
            }
        }
        for (i, f) in self.flows.iter().enumerate() {
            if f.packet_count() > 0 {
                self.schedule(f.emission_time(0), Action::Emit { flow: i, seq: 0 });
            }
        }
        if self.opts.strategy != Strategy::None {
            self.horizon = self.horizon.max(self.opts.migrate_at);
            self.schedule(self.opts.migrate_at, Action::StartMigration);
        }
    }

    pub(crate) fn run(mut self) -> MigrationMetrics {
        self.setup();
        loop {
            let end = self.horizon + self.opts.settle;
            let Some(ev) = self.engine.pop_until(end) else { break };
            self.counters.events += 1;
            match ev.action {
                Action::Emit { flow, seq } => self.emit(flow, seq),
                Action::Arrive { at, packet } => self.arrive(at, packet),
                Action::Expire { node } => self.expire(node),
                Action::StartMigration => self.start_migration(),
                Action::CloneInstall { batch } => self.clone_install(batch),
                Action::Apply { index } => self.apply(index),
                Action::Activate => self.presenter.active = VnSide::New,
            }
        }
        self.finish()
    }

    fn emit(&mut self, flow: usize, seq: u64) {
        let f = &self.flows[flow];
        let packet = Packet { id: self.next_packet, flow: f.id, seq, src: f.src, dst: f.dst };
        self.next_packet += 1;
        self.counters.packets_emitted += 1;
        let host = self.topo.host_node(f.src);
        if seq + 1 < f.packet_count() {
            let t = f.emission_time(seq + 1);
            self.schedule(t, Action::Emit { flow, seq: seq + 1 });
        }
        self.trace("emit", host, Some(PortNo(1)), Some(&packet));
        self.transmit(Endpoint::new(host, PortNo(1)), packet);
    }

    fn transmit(&mut self, from: Endpoint, packet: Packet) {
        let Some(pl) = self.ports[from.node.0 as usize].get(&from.port) else {
            self.counters.link_drops += 1;
            return;
        };
        let (link, dir, far) = (pl.link, pl.dir, pl.far);
        let now = self.now();
        match self.links[link][dir].transmit(now) {
            Transmission::Arrival { arrival, .. } => self.schedule(arrival, Action::Arrive { at: far, packet }),
            Transmission::Dropped => self.counters.link_drops += 1,
        }
    }

    fn arrive(&mut self, at: Endpoint, packet: Packet) {
        match self.topo.node(at.node).role {
            NodeRole::Host { host } => {
                if packet.dst == host {
                    self.trace("deliver", at.node, Some(at.port), Some(&packet));
                    self.deliver(packet);
                } else {
                    self.counters.stray_deliveries += 1;
                }
            }
            NodeRole::RackSwitch { .. } => {
                let outs: Vec<PortNo> = self.ports[at.node.0 as usize].keys().copied().filter(|p| *p != at.port).collect();
                for p in outs {
                    self.transmit(Endpoint::new(at.node, p), packet);
                }
            }
            _ => match self.sw(at.node).ingress(at.port, packet) {
                Ingress::Accepted => self.process(at.node, at.port, packet),
                Ingress::Buffered => {
                    self.counters.dom0_buffered += 1;
                    self.trace("buffer", at.node, Some(at.port), Some(&packet));
                }
                Ingress::Discarded => {
                    self.counters.dom0_discarded += 1;
                    self.trace("discard", at.node, Some(at.port), Some(&packet));
                }
            },
        }
    }

    fn deliver(&mut self, packet: Packet) {
        let now = self.now();
        let rx = &mut self.rx[packet.flow.0 as usize];
        let k = packet.seq as usize;
        if rx.seen[k] {
            rx.duplicates += 1;
            return;
        }
        rx.seen[k] = true;
        rx.received += 1;
        if let Some(last) = rx.last {
            let gap = now.saturating_sub(last);
            if gap > rx.max_gap {
                rx.max_gap = gap;
                rx.max_gap_start = Some(last);
            }
        }
        rx.last = Some(now);
    }

    fn process(&mut self, node: NodeId, in_port: PortNo, packet: Packet) {
        let now = self.now();
        let sw = self.sw(node);
        if sw.role == SwitchRole::Bridge {
            let other = sw.ports.keys().copied().find(|p| *p != in_port);
            if let Some(p) = other {
                self.egress(node, p, packet);
            }
            return;
        }
        match sw.table.lookup(&packet, in_port, now) {
            Lookup::Output(p) => self.egress(node, p, packet),
            Lookup::Drop => {
                self.counters.table_drops += 1;
                self.trace("drop", node, Some(in_port), Some(&packet));
            }
            Lookup::Miss => {
                if sw.app == AppKind::LearningSwitch {
                    self.packet_in(node, in_port, packet);
                } else {
                    self.counters.miss_drops += 1;
                }
            }
        }
    }

    fn egress(&mut self, node: NodeId, port: PortNo, packet: Packet) {
        if !self.sw(node).is_port_up(port) {
            self.counters.egress_down_drops += 1;
            return;
        }
        self.transmit(Endpoint::new(node, port), packet);
    }

    fn packet_in(&mut self, node: NodeId, in_port: PortNo, packet: Packet) {
        self.counters.packet_ins += 1;
        self.trace("packet-in", node, Some(in_port), Some(&packet));
        let dpid = self.sw(node).dpid.expect("VN switches have a datapath id");
        let Some(SwitchEvent::PacketIn { dpid: cdpid, in_port: cport, .. }) =
            self.present(SwitchEvent::PacketIn { dpid, in_port, packet })
        else {
            self.counters.miss_drops += 1;
            return;
        };
        let now = self.now();
        let d = self.app.handle(cdpid, &packet, cport, now);
        if d.conflict {
            self.counters.learning_conflicts += 1;
        }
        match self.presenter.route_commands(dpid, &d.flow_mods) {
            Ok(mods) => self.apply_mods(node, &mods),
            Err(_) => self.counters.flow_mod_errors += 1,
        }
        match d.forward {
            Forward::Port(cp) => match self.presenter.physical_port(dpid, cp) {
                Some(p) => self.egress(node, p, packet),
                None => self.counters.app_drops += 1,
            },
            Forward::Flood => {
                let outs: Vec<PortNo> = self.flood[node.0 as usize].iter().copied().filter(|p| *p != in_port).collect();
                for p in outs {
                    self.egress(node, p, packet);
                }
            }
            Forward::Drop => self.counters.app_drops += 1,
        }
    }

    fn apply_mods(&mut self, node: NodeId, mods: &[FlowMod]) {
        for m in mods {
            match self.sw(node).apply_flow_mod(m) {
                Ok(_) => {
                    if let FlowMod::Install { rule } = m {
                        if let Some(t) = rule.expiry {
                            self.schedule(t, Action::Expire { node });
                        }
                    }
                }
                Err(_) => self.counters.flow_mod_errors += 1,
            }
        }
    }

    fn expire(&mut self, node: NodeId) {
        let now = self.now();
        let sw = self.sw(node);
        let removed = sw.table.remove_expired(now);
        let Some(dpid) = sw.dpid else { return };
        for rule in removed {
            self.trace("expire", node, rule.matcher.in_port, None);
            self.present(SwitchEvent::FlowRemoved { dpid, rule });
        }
    }

    fn abort_early(&mut self, why: String) {
        let now = self.now();
        self.timeline = Some(MigrationTimeline {
            started: now,
            cloned_rules: 0,
            clone_done: now,
            drain_delay: SimTime::ZERO,
            phase_done: Vec::new(),
            finished: now,
            duration: SimTime::ZERO,
            switch_overs: Vec::new(),
            commands: Vec::new(),
            rollbacks: Vec::new(),
            abort: Some(why),
        });
    }

    fn start_migration(&mut self) {
        let topo = self.topo;
        let opts = self.opts;
        let now = self.now();
        self.presenter.migrating = true;

        let old = topo.vn(VnSide::Old);
        let snapshot = {
            let sws = old.switches.iter().map(|n| self.switches[n.0 as usize].as_ref().expect("VN switch"));
            poll_flow_tables(sws, now)
        };
        let snapshot = match snapshot {
            Ok(s) => s,
            Err(e) => return self.abort_early(e.to_string()),
        };
        let mut lag_rng = stream(self.seed, Stream::ChannelLag);
        let mut loss_rng = stream(self.seed, Stream::CommandLoss);
        let clone = match clone_tables(&snapshot, &topo.mapping, opts.per_rule_cost, &opts.channel, &mut lag_rng, now) {
            Ok(c) => c,
            Err(e) => return self.abort_early(e.to_string()),
        };
        for b in &clone.batches {
            let Some(node) = topo.node_by_dpid(b.target) else {
                return self.abort_early(format!("no switch with datapath {}", b.target));
            };
            let sw = self.switches[node.0 as usize].as_ref().expect("VN switch");
            for r in &b.rules {
                let ports = r.matcher.in_port.into_iter().chain(r.action.out_port());
                if let Some(p) = ports.into_iter().find(|p| !sw.ports.contains_key(p)) {
                    return self.abort_early(format!("install rejected on {}: no port {p}", b.target));
                }
            }
        }

        let drain = opts.drain_delay.unwrap_or_else(|| SimTime(2 * topo.max_path_latency(VnSide::Old).0));
        let schedule = match opts.strategy {
            Strategy::Gateway => {
                match build_redirection_schedule(&RedirectPoint::gateways(topo), opts.ordering, drain) {
                    Ok(s) => s,
                    Err(e) => return self.abort_early(e.to_string()),
                }
            }
            Strategy::InterfaceToggle => build_toggle_schedule(topo),
            Strategy::None => unreachable!("baseline runs never start a migration"),
        };
        let record = execute_schedule(&schedule, clone.completion, &opts.channel, &opts.exec, &mut lag_rng, &mut loss_rng);

        for (i, b) in clone.batches.iter().enumerate() {
            self.schedule(b.confirmed_at, Action::CloneInstall { batch: i });
        }
        let apps = record.applications(&schedule);
        let mut applications = Vec::with_capacity(apps.len());
        for (i, a) in apps.iter().enumerate() {
            self.schedule(a.at, Action::Apply { index: i });
            applications.push((a.target, a.op.clone()));
        }

        let mut switch_overs = Vec::new();
        if let (None, Some(sp)) = (&record.abort, schedule.switch_phase()) {
            self.schedule(record.phase_done[sp], Action::Activate);
            for c in record.commands.iter().filter(|c| c.phase == sp) {
                let host = match opts.strategy {
                    Strategy::Gateway => topo.gateway(c.target).map(|g| g.host),
                    _ => match topo.node(c.target).role {
                        NodeRole::Host { host } => Some(host),
                        _ => None,
                    },
                };
                if let (Some(host), Some(at)) = (host, c.executed) {
                    switch_overs.push(SwitchOver { host, node: c.target, at });
                }
            }
        }

        self.horizon = self.horizon.max(record.finished);
        self.timeline = Some(MigrationTimeline {
            started: now,
            cloned_rules: clone.rule_count(),
            clone_done: clone.completion,
            drain_delay: drain,
            phase_done: record.phase_done.clone(),
            finished: record.finished,
            duration: record.finished.saturating_sub(now),
            switch_overs,
            commands: record.commands,
            rollbacks: record.rollbacks,
            abort: record.abort.map(|a| format!("command {} lost twice in phase {}", a.label, a.phase + 1)),
        });
        self.plan = Some(Plan { clone, applications });
    }

    fn clone_install(&mut self, batch: usize) {
        let plan = self.plan.take().expect("clone installs follow a plan");
        let b = &plan.clone.batches[batch];
        if let Some(node) = self.topo.node_by_dpid(b.target) {
            self.trace("clone-install", node, None, None);
            let mods: Vec<FlowMod> = b.rules.iter().map(|r| FlowMod::install(*r)).collect();
            self.apply_mods(node, &mods);
        }
        self.plan = Some(plan);
    }

    fn apply(&mut self, index: usize) {
        let plan = self.plan.take().expect("commands follow a plan");
        let (target, op) = &plan.applications[index];
        self.trace("command", *target, None, None);
        match op {
            CommandOp::FlowMods { mods } => self.apply_mods(*target, mods),
            CommandOp::Toggle { down, up } => {
                self.set_admin(*down, false);
                self.set_admin(*up, true);
            }
        }
        self.plan = Some(plan);
    }

    fn set_admin(&mut self, ep: Endpoint, up: bool) {
        let sw = self.sw(ep.node);
        let Ok(flushed) = sw.set_interface_admin(ep.port, up) else {
            self.counters.flow_mod_errors += 1;
            return;
        };
        if let Some(dpid) = sw.dpid {
            self.present(SwitchEvent::PortStatus { dpid, port: ep.port, up });
        }
        for p in flushed {
            self.counters.dom0_flushed += 1;
            self.trace("flush", ep.node, Some(ep.port), Some(&p));
            self.process(ep.node, ep.port, p);
        }
    }

    fn finish(self) -> MigrationMetrics {
        let flows = self
            .flows
            .iter()
            .zip(&self.rx)
            .map(|(f, rx)| {
                let sent = f.packet_count();
                let lost = sent - rx.received;
                FlowStats {
                    flow: f.id,
                    src: f.src,
                    dst: f.dst,
                    rate_pps: f.rate,
                    sent,
                    received: rx.received,
                    duplicates: rx.duplicates,
                    lost,
                    loss_pct: if sent == 0 { 0.0 } else { 100.0 * lost as f64 / sent as f64 },
                    max_gap: rx.max_gap,
                    max_gap_start: rx.max_gap_start,
                }
            })
            .collect();
        let mut counters = self.counters;
        counters.learning_conflicts = counters.learning_conflicts.max(self.app.conflicts());
        MigrationMetrics {
            strategy: self.opts.strategy,
            ordering: self.opts.ordering,
            channel: self.opts.channel.kind,
            seed: self.seed,
            end_time: self.engine.now(),
            flows,
            migration: self.timeline,
            counters,
            suppressed: self.presenter.suppressed().clone(),
            client_events: self.log,
            trace: self.trace,
        }
    }
}

