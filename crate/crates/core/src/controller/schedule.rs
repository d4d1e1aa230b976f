use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::channel::CommandChannel;
use super::ControllerError;
use crate::dataplane::{Action, FlowMod, FlowRule, Match, RulePredicate};
use crate::simengine::{SimRng, SimTime};
use crate::topology::{Dpid, Endpoint, NodeId, PortNo, ScenarioTopology};

/// Priority of the controller-owned rules on gateways.
pub const GATEWAY_PRIORITY: u16 = 10;

/// How the redirection commands are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    /// Three phases: accept from the new VN, move host traffic, then
    /// disconnect the old VN after a drain delay.
    Algorithm1,
    /// Each gateway swaps all of its rules in one atomic command, all
    /// gateways at once.
    Simultaneous,
    /// Three phases, with phase 3 written as an update of rules
    /// `in=host, out=old` to Drop. Phase 2 has already rewritten those rules,
    /// so it matches nothing and the old VN stays attached.
    PseudocodeLiteral,
}

impl Ordering {
    pub const ALL: [Ordering; 3] = [Ordering::Algorithm1, Ordering::Simultaneous, Ordering::PseudocodeLiteral];

    pub fn as_str(self) -> &'static str {
        match self {
            Ordering::Algorithm1 => "algorithm1",
            Ordering::Simultaneous => "simultaneous",
            Ordering::PseudocodeLiteral => "pseudocode-literal",
        }
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ordering {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ordering::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown ordering `{s}` (expected algorithm1, simultaneous or pseudocode-literal)"))
    }
}

/// A switch where traffic is moved from the old VN to the new one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedirectPoint {
    pub node: NodeId,
    pub dpid: Dpid,
    pub host_ports: Vec<PortNo>,
    pub old_port: PortNo,
    pub new_port: Option<PortNo>,
}

impl RedirectPoint {
    /// One redirect point per gateway of the scenario.
    pub fn gateways(topo: &ScenarioTopology) -> Vec<RedirectPoint> {
        topo.gateways
            .iter()
            .map(|g| RedirectPoint {
                node: g.node,
                dpid: g.dpid,
                host_ports: vec![g.host_port],
                old_port: g.old_port,
                new_port: Some(g.new_port),
            })
            .collect()
    }

    /// Rules a gateway holds before migration: host traffic to the old VN,
    /// old-VN traffic to the host, new-VN traffic dropped.
    pub fn initial_rules(&self) -> Vec<FlowRule> {
        let mut out = Vec::new();
        for &h in &self.host_ports {
            out.push(FlowRule::new(GATEWAY_PRIORITY, Match::in_port(h), Action::Output(self.old_port)));
        }
        if let [h] = self.host_ports[..] {
            out.push(FlowRule::new(GATEWAY_PRIORITY, Match::in_port(self.old_port), Action::Output(h)));
        }
        if let Some(n) = self.new_port {
            out.push(FlowRule::new(GATEWAY_PRIORITY, Match::in_port(n), Action::Drop));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CommandOp {
    /// Applied atomically, in order.
    FlowMods { mods: Vec<FlowMod> },
    /// Interface admin change on the hypervisor: `down` goes down, then `up` comes up.
    Toggle { down: Endpoint, up: Endpoint },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub target: NodeId,
    pub label: String,
    pub op: CommandOp,
    /// Restores the previous state if the migration is rolled back.
    pub undo: Option<CommandOp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseKind {
    AcceptNew,
    MoveHostTraffic,
    DisconnectOld,
    /// Everything for one redirect point at once.
    Swap,
    Toggle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    /// Wait after the previous phase's barrier before issuing.
    pub delay: SimTime,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedirectionSchedule {
    pub ordering: Option<Ordering>,
    pub phases: Vec<Phase>,
}

impl RedirectionSchedule {
    pub fn command_count(&self) -> usize {
        self.phases.iter().map(|p| p.commands.len()).sum()
    }

    /// Index of the phase that moves host traffic onto the new VN.
    pub fn switch_phase(&self) -> Option<usize> {
        self.phases
            .iter()
            .position(|p| matches!(p.kind, PhaseKind::MoveHostTraffic | PhaseKind::Swap | PhaseKind::Toggle))
    }

    /// Commands flattened in issue order, tagged with their phase.
    pub fn sequence(&self) -> impl Iterator<Item = (usize, &Command)> {
        self.phases.iter().enumerate().flat_map(|(i, p)| p.commands.iter().map(move |c| (i, c)))
    }
}

fn mods(m: Vec<FlowMod>) -> CommandOp {
    CommandOp::FlowMods { mods: m }
}

fn accept_new(p: &RedirectPoint, new: PortNo) -> Vec<FlowMod> {
    p.host_ports
        .iter()
        .map(|&h| FlowMod::install(FlowRule::new(GATEWAY_PRIORITY, Match::in_port(new), Action::Output(h))))
        .collect()
}

fn move_host(p: &RedirectPoint, from: PortNo, to: PortNo) -> Vec<FlowMod> {
    p.host_ports
        .iter()
        .map(|&h| FlowMod::Update {
            predicate: RulePredicate { in_port: Some(h), out_port: Some(from), ..RulePredicate::default() },
            action: Action::Output(to),
        })
        .collect()
}

fn disconnect_old(p: &RedirectPoint) -> Vec<FlowMod> {
    vec![FlowMod::install(FlowRule::new(GATEWAY_PRIORITY, Match::in_port(p.old_port), Action::Drop))]
}

fn reconnect_old(p: &RedirectPoint) -> Vec<FlowMod> {
    p.host_ports
        .iter()
        .map(|&h| FlowMod::install(FlowRule::new(GATEWAY_PRIORITY, Match::in_port(p.old_port), Action::Output(h))))
        .collect()
}

fn literal_disconnect(p: &RedirectPoint) -> Vec<FlowMod> {
    p.host_ports
        .iter()
        .map(|&h| FlowMod::Update {
            predicate: RulePredicate { in_port: Some(h), out_port: Some(p.old_port), ..RulePredicate::default() },
            action: Action::Drop,
        })
        .collect()
}

/// Builds the redirection commands for the given redirect points.
///
/// Redirect points may be gateways or, for a partial migration, the old-VN
/// neighbours of the migrated region.
pub fn build_redirection_schedule(
    points: &[RedirectPoint],
    ordering: Ordering,
    drain_delay: SimTime,
) -> Result<RedirectionSchedule, ControllerError> {
    let mut with_new = Vec::with_capacity(points.len());
    for p in points {
        let n = p.new_port.ok_or(ControllerError::MissingNewPort(p.dpid))?;
        with_new.push((p, n));
    }
    let cmd = |p: &RedirectPoint, label: &str, op: Vec<FlowMod>, undo: Option<Vec<FlowMod>>| Command {
        target: p.node,
        label: format!("{label}@{}", p.dpid),
        op: mods(op),
        undo: undo.map(mods),
    };

    let phases = match ordering {
        Ordering::Simultaneous => vec![Phase {
            kind: PhaseKind::Swap,
            delay: SimTime::ZERO,
            commands: with_new
                .iter()
                .map(|&(p, n)| {
                    let mut op = accept_new(p, n);
                    op.extend(move_host(p, p.old_port, n));
                    op.extend(disconnect_old(p));
                    let mut undo = move_host(p, n, p.old_port);
                    undo.extend(reconnect_old(p));
                    cmd(p, "swap", op, Some(undo))
                })
                .collect(),
        }],
        Ordering::Algorithm1 | Ordering::PseudocodeLiteral => {
            let p1 = with_new.iter().map(|&(p, n)| cmd(p, "accept-new", accept_new(p, n), None)).collect();
            let p2 = with_new
                .iter()
                .map(|&(p, n)| cmd(p, "move-host", move_host(p, p.old_port, n), Some(move_host(p, n, p.old_port))))
                .collect();
            let p3 = with_new
                .iter()
                .map(|&(p, _)| {
                    if ordering == Ordering::Algorithm1 {
                        cmd(p, "disconnect-old", disconnect_old(p), Some(reconnect_old(p)))
                    } else {
                        cmd(p, "disconnect-old", literal_disconnect(p), None)
                    }
                })
                .collect();
            vec![
                Phase { kind: PhaseKind::AcceptNew, delay: SimTime::ZERO, commands: p1 },
                Phase { kind: PhaseKind::MoveHostTraffic, delay: SimTime::ZERO, commands: p2 },
                Phase { kind: PhaseKind::DisconnectOld, delay: drain_delay, commands: p3 },
            ]
        }
    };
    Ok(RedirectionSchedule { ordering: Some(ordering), phases })
}

/// Interface-toggle migration: per host, take the old-VN attachment down and
/// bring the new-VN attachment up.
pub fn build_toggle_schedule(topo: &ScenarioTopology) -> RedirectionSchedule {
    let [old, new] = &topo.vns;
    let commands = old
        .attachments
        .iter()
        .zip(&new.attachments)
        .map(|(ao, an)| {
            let down = Endpoint::new(old.switches[ao.switch], ao.port);
            let up = Endpoint::new(new.switches[an.switch], an.port);
            Command {
                target: topo.host_node(ao.host),
                label: format!("toggle@{}", ao.host),
                op: CommandOp::Toggle { down, up },
                undo: Some(CommandOp::Toggle { down: up, up: down }),
            }
        })
        .collect();
    RedirectionSchedule {
        ordering: None,
        phases: vec![Phase { kind: PhaseKind::Toggle, delay: SimTime::ZERO, commands }],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecOptions {
    /// How long to wait for an acknowledgement before resending once.
    pub ack_timeout: SimTime,
    /// Chance that a command (or its acknowledgement) is lost.
    pub loss_probability: f64,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions { ack_timeout: SimTime::from_secs(3), loss_probability: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub phase: usize,
    pub index: usize,
    pub target: NodeId,
    pub label: String,
    pub issued: SimTime,
    /// Execution time; the acknowledgement arrives at the same instant.
    pub executed: Option<SimTime>,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollbackRecord {
    pub target: NodeId,
    pub label: String,
    pub op: CommandOp,
    pub issued: SimTime,
    pub executed: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Abort {
    pub phase: usize,
    pub label: String,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub start: SimTime,
    pub commands: Vec<CommandRecord>,
    /// Barrier time of each completed phase.
    pub phase_done: Vec<SimTime>,
    /// Last confirmation, rollbacks included.
    pub finished: SimTime,
    pub abort: Option<Abort>,
    pub rollbacks: Vec<RollbackRecord>,
}

/// A command effect to apply to the dataplane at a given time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Application<'a> {
    pub at: SimTime,
    pub target: NodeId,
    pub op: &'a CommandOp,
}

impl ExecutionRecord {
    pub fn executed_at(&self, phase: usize, target: NodeId) -> Option<SimTime> {
        self.commands.iter().find(|c| c.phase == phase && c.target == target).and_then(|c| c.executed)
    }

    /// Everything the schedule does to the dataplane, rollbacks included.
    pub fn applications<'a>(&'a self, schedule: &'a RedirectionSchedule) -> Vec<Application<'a>> {
        let mut out: Vec<Application<'a>> = self
            .commands
            .iter()
            .filter_map(|c| {
                let at = c.executed?;
                Some(Application { at, target: c.target, op: &schedule.phases[c.phase].commands[c.index].op })
            })
            .chain(self.rollbacks.iter().map(|r| Application { at: r.executed, target: r.target, op: &r.op }))
            .collect();
        out.sort_by_key(|a| a.at);
        out
    }
}

/// Times every command of the schedule.
///
/// Commands of a phase are issued together; each executes one sampled lag
/// after issue and is confirmed at that instant. The next phase is issued at
/// the last confirmation plus its delay. A command whose acknowledgement does
/// not arrive within `ack_timeout` is resent once; a second loss aborts the
/// run and every executed command with an undo is reverted.
pub fn execute_schedule(
    schedule: &RedirectionSchedule,
    start: SimTime,
    channel: &CommandChannel,
    opts: &ExecOptions,
    lag_rng: &mut SimRng,
    loss_rng: &mut SimRng,
) -> ExecutionRecord {
    let mut rec = ExecutionRecord {
        start,
        commands: Vec::new(),
        phase_done: Vec::new(),
        finished: start,
        abort: None,
        rollbacks: Vec::new(),
    };
    let mut barrier = start;
    for (pi, phase) in schedule.phases.iter().enumerate() {
        let issue = barrier + phase.delay;
        let mut phase_end = issue;
        for (ci, c) in phase.commands.iter().enumerate() {
            let mut sent = issue;
            let mut attempts = 0;
            let mut executed = None;
            while attempts < 2 {
                attempts += 1;
                let lag = channel.sample(lag_rng);
                let lost = opts.loss_probability > 0.0 && loss_rng.random::<f64>() < opts.loss_probability;
                if !lost {
                    executed = Some(sent + lag);
                    break;
                }
                sent += opts.ack_timeout;
            }
            match executed {
                Some(t) => phase_end = phase_end.max(t),
                None => {
                    let at = sent;
                    if rec.abort.as_ref().is_none_or(|a| at < a.at) {
                        rec.abort = Some(Abort { phase: pi, label: c.label.clone(), at });
                    }
                }
            }
            rec.commands.push(CommandRecord {
                phase: pi,
                index: ci,
                target: c.target,
                label: c.label.clone(),
                issued: issue,
                executed,
                attempts,
            });
        }
        if let Some(abort) = &rec.abort {
            let at = abort.at.max(phase_end);
            let mut rollbacks = Vec::new();
            for c in rec.commands.iter().rev() {
                let Some(_) = c.executed else { continue };
                let cmd = &schedule.phases[c.phase].commands[c.index];
                if let Some(undo) = &cmd.undo {
                    let executed = at + channel.sample(lag_rng);
                    rollbacks.push(RollbackRecord {
                        target: c.target,
                        label: format!("undo-{}", c.label),
                        op: undo.clone(),
                        issued: at,
                        executed,
                    });
                }
            }
            rec.finished = rollbacks.iter().map(|r| r.executed).fold(at, SimTime::max);
            rec.rollbacks = rollbacks;
            return rec;
        }
        rec.phase_done.push(phase_end);
        barrier = phase_end;
    }
    rec.finished = barrier;
    rec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataplane::{Lookup, Packet, SwitchRole, SwitchState};
    use crate::simengine::rng::{stream, Stream};
    use crate::simengine::FlowId;
    use crate::topology::HostId;

    fn point(i: u32) -> RedirectPoint {
        RedirectPoint {
            node: NodeId(i),
            dpid: Dpid(0x300 + i as u64),
            host_ports: vec![PortNo(1)],
            old_port: PortNo(2),
            new_port: Some(PortNo(3)),
        }
    }

    fn gateway_switch(p: &RedirectPoint) -> SwitchState {
        let mut sw = SwitchState::new(
            p.node,
            Some(p.dpid),
            SwitchRole::Gateway,
            [(PortNo(1), true), (PortNo(2), true), (PortNo(3), true)],
            0,
        );
        for r in p.initial_rules() {
            sw.table.install(r);
        }
        sw
    }

    fn apply(sw: &mut SwitchState, c: &Command) -> usize {
        let CommandOp::FlowMods { mods } = &c.op else { panic!() };
        mods.iter().map(|m| sw.apply_flow_mod(m).unwrap()).sum()
    }

    #[test]
    fn command_counts_follow_phase_structure() {
        let two = build_redirection_schedule(&[point(0), point(1)], Ordering::Algorithm1, SimTime::ZERO).unwrap();
        assert_eq!(two.command_count(), 6);
        assert_eq!(two.phases.iter().map(|p| p.commands.len()).collect::<Vec<_>>(), vec![2, 2, 2]);
        let three =
            build_redirection_schedule(&[point(0), point(1), point(2)], Ordering::Algorithm1, SimTime::ZERO).unwrap();
        assert_eq!(three.command_count(), 9);
    }

    #[test]
    fn phases_only_hold_their_kind_of_mod() {
        let s = build_redirection_schedule(&[point(0), point(1)], Ordering::Algorithm1, SimTime::ZERO).unwrap();
        for c in &s.phases[0].commands {
            let CommandOp::FlowMods { mods } = &c.op else { panic!() };
            assert!(mods.iter().all(|m| matches!(m, FlowMod::Install { .. })));
        }
        for c in &s.phases[1].commands {
            let CommandOp::FlowMods { mods } = &c.op else { panic!() };
            assert!(mods.iter().all(|m| matches!(m, FlowMod::Update { action: Action::Output(PortNo(3)), .. })));
        }
    }

    #[test]
    fn missing_new_port_is_an_error() {
        let mut p = point(0);
        p.new_port = None;
        assert_eq!(
            build_redirection_schedule(&[p], Ordering::Algorithm1, SimTime::ZERO).unwrap_err(),
            ControllerError::MissingNewPort(Dpid(0x300))
        );
    }

    #[test]
    fn gateway_tables_after_three_phases() {
        let p = point(0);
        let mut sw = gateway_switch(&p);
        let pkt = Packet { id: 0, flow: FlowId(0), seq: 0, src: HostId(0), dst: HostId(1) };
        let now = SimTime::ZERO;
        assert_eq!(sw.table.lookup(&pkt, PortNo(3), now), Lookup::Drop);
        assert_eq!(sw.table.lookup(&pkt, PortNo(1), now), Lookup::Output(PortNo(2)));
        let s = build_redirection_schedule(std::slice::from_ref(&p), Ordering::Algorithm1, SimTime::ZERO).unwrap();
        let counts: Vec<usize> = s.phases.iter().map(|ph| apply(&mut sw, &ph.commands[0])).collect();
        assert_eq!(counts, vec![1, 1, 1]);
        assert_eq!(sw.table.lookup(&pkt, PortNo(2), now), Lookup::Drop);
        assert_eq!(sw.table.lookup(&pkt, PortNo(3), now), Lookup::Output(PortNo(1)));
        assert_eq!(sw.table.lookup(&pkt, PortNo(1), now), Lookup::Output(PortNo(3)));
        assert_eq!(sw.table.len(), 3);
    }

    #[test]
    fn literal_phase_three_matches_nothing() {
        let p = point(0);
        let mut sw = gateway_switch(&p);
        let s = build_redirection_schedule(std::slice::from_ref(&p), Ordering::PseudocodeLiteral, SimTime::ZERO).unwrap();
        let counts: Vec<usize> = s.phases.iter().map(|ph| apply(&mut sw, &ph.commands[0])).collect();
        assert_eq!(counts, vec![1, 1, 0]);
        let pkt = Packet { id: 0, flow: FlowId(0), seq: 0, src: HostId(1), dst: HostId(0) };
        assert_eq!(sw.table.lookup(&pkt, PortNo(2), SimTime::ZERO), Lookup::Output(PortNo(1)));
    }

    #[test]
    fn zero_lag_channel_executes_simultaneously() {
        let s = build_redirection_schedule(&[point(0), point(1)], Ordering::Simultaneous, SimTime::ZERO).unwrap();
        let mut a = stream(1, Stream::ChannelLag);
        let mut b = stream(1, Stream::CommandLoss);
        let t0 = SimTime::from_millis(10);
        let rec = execute_schedule(&s, t0, &CommandChannel::ideal(), &ExecOptions::default(), &mut a, &mut b);
        assert_eq!(rec.executed_at(0, NodeId(0)), Some(t0));
        assert_eq!(rec.executed_at(0, NodeId(0)), rec.executed_at(0, NodeId(1)));
    }

    #[test]
    fn phase_barriers_wait_for_every_confirmation() {
        let pts: Vec<_> = (0..3).map(point).collect();
        let drain = SimTime::from_millis(20);
        let s = build_redirection_schedule(&pts, Ordering::Algorithm1, drain).unwrap();
        let mut a = stream(4, Stream::ChannelLag);
        let mut b = stream(4, Stream::CommandLoss);
        let rec = execute_schedule(&s, SimTime::ZERO, &CommandChannel::ssh(), &ExecOptions::default(), &mut a, &mut b);
        assert_eq!(rec.phase_done.len(), 3);
        for c in &rec.commands {
            let expected_issue = match c.phase {
                0 => SimTime::ZERO,
                1 => rec.phase_done[0],
                _ => rec.phase_done[1] + drain,
            };
            assert_eq!(c.issued, expected_issue);
            assert!(c.executed.unwrap() <= rec.phase_done[c.phase]);
        }
        let t: Vec<_> = pts.iter().map(|p| rec.executed_at(1, p.node).unwrap()).collect();
        assert!(t[0] != t[1] || t[1] != t[2]);
        assert_eq!(rec.finished, rec.phase_done[2]);
    }

    #[test]
    fn double_loss_aborts_and_rolls_back() {
        let pts: Vec<_> = (0..2).map(point).collect();
        let s = build_redirection_schedule(&pts, Ordering::Algorithm1, SimTime::ZERO).unwrap();
        let mut a = stream(4, Stream::ChannelLag);
        let mut b = stream(4, Stream::CommandLoss);
        let opts = ExecOptions { ack_timeout: SimTime::from_millis(500), loss_probability: 1.0 };
        let rec = execute_schedule(&s, SimTime::ZERO, &CommandChannel::of_message(), &opts, &mut a, &mut b);
        let abort = rec.abort.unwrap();
        assert_eq!(abort.phase, 0);
        assert_eq!(abort.at, SimTime::from_millis(1000));
        assert!(rec.rollbacks.is_empty());
        assert!(rec.commands.iter().all(|c| c.phase == 0 && c.attempts == 2));
    }

    #[test]
    fn ordering_names_round_trip() {
        for o in Ordering::ALL {
            assert_eq!(o.as_str().parse::<Ordering>().unwrap(), o);
        }
    }
}
