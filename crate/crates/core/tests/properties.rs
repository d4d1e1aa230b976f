//! Property tests over whole simulated runs and redirection schedules.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use vnmig::controller::{
    build_redirection_schedule, execute_schedule, CommandChannel, CommandOp, ExecOptions, MigrationMetrics, Ordering,
    RedirectPoint, Scenario, Strategy as Mode, TrafficSpec,
};
use vnmig::dataplane::{FlowMod, FlowTable, HypervisorBuffer, Lookup, Packet};
use vnmig::simengine::rng::stream;
use vnmig::simengine::{FlowId, SimTime, Stream};
use vnmig::topology::{HostId, Latencies, Layout, NodeId, PortNo, VnShape};

fn arb_scenario() -> impl Strategy<Value = Scenario> {
    (
        2usize..=4,
        prop_oneof![(1usize..=5).prop_map(VnShape::line), (3usize..=5).prop_map(VnShape::ring)],
        1u64..=15,
        50.0f64..400.0,
        1000u64..2500,
        300u64..900,
        prop_oneof![Just(Ordering::Algorithm1), Just(Ordering::Simultaneous), Just(Ordering::PseudocodeLiteral)],
        prop_oneof![Just(CommandChannel::ideal()), Just(CommandChannel::of_message())],
    )
        .prop_map(|(hosts, vn, lat, rate, dur, at, ordering, channel)| {
            let mut s = Scenario::three_host_line();
            s.hosts = hosts;
            s.vn = vn;
            s.latencies = Latencies::uniform(SimTime::from_millis(lat));
            s.traffic = TrafficSpec::all_pairs(rate.round(), SimTime::ZERO, SimTime::from_millis(dur));
            s.migration.migrate_at = SimTime::from_millis(at);
            s.migration.ordering = ordering;
            s.migration.channel = channel;
            s.migration.record_trace = true;
            s.migration.record_events = true;
            s
        })
}

/// Delivered packet ids per (source host node, sink host node), in delivery order.
fn deliveries(m: &MigrationMetrics) -> BTreeMap<(NodeId, NodeId), Vec<u64>> {
    let origin: BTreeMap<u64, NodeId> =
        m.trace.iter().filter(|r| r.kind == "emit").map(|r| (r.packet.unwrap(), r.node)).collect();
    let mut out: BTreeMap<_, Vec<u64>> = BTreeMap::new();
    for r in m.trace.iter().filter(|r| r.kind == "deliver") {
        let id = r.packet.unwrap();
        out.entry((origin[&id], r.node)).or_default().push(id);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_are_deterministic(s in arb_scenario(), seed in 0u64..1000) {
        let a = serde_json::to_string(&s.run(seed).unwrap()).unwrap();
        let b = serde_json::to_string(&s.run(seed).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn clock_never_goes_backwards(s in arb_scenario(), seed in 0u64..1000) {
        let m = s.run(seed).unwrap();
        prop_assert!(m.trace.windows(2).all(|w| w[0].time <= w[1].time));
        prop_assert!(m.client_events.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn packets_are_conserved(s in arb_scenario(), seed in 0u64..1000) {
        let m = s.run(seed).unwrap();
        let mut emitted = 0;
        for f in &m.flows {
            prop_assert_eq!(f.sent, f.received + f.lost);
            prop_assert!(f.received <= f.sent);
            emitted += f.sent;
        }
        prop_assert_eq!(emitted, m.counters.packets_emitted);
        let delivered = m.trace.iter().filter(|r| r.kind == "deliver").count() as u64;
        let received: u64 = m.flows.iter().map(|f| f.received + f.duplicates).sum();
        prop_assert_eq!(delivered, received);
    }

    #[test]
    fn fixed_paths_keep_order(s in arb_scenario(), seed in 0u64..1000) {
        let mut s = s;
        s.migration.strategy = Mode::None;
        let m = s.run(seed).unwrap();
        for (pair, ids) in deliveries(&m) {
            prop_assert!(ids.windows(2).all(|w| w[0] < w[1]), "reordered or duplicated on {:?}", pair);
        }
    }

    #[test]
    fn three_phase_order_never_reorders_on_equal_paths(s in arb_scenario(), seed in 0u64..1000) {
        let mut s = s;
        s.migration.ordering = Ordering::Algorithm1;
        let m = s.run(seed).unwrap();
        prop_assert_eq!(m.total_lost(), 0);
        for (pair, ids) in deliveries(&m) {
            prop_assert!(ids.windows(2).all(|w| w[0] < w[1]), "reordered on {:?}", pair);
        }
    }

    #[test]
    fn dom0_buffer_accounts_for_every_packet(cap in 0usize..20, ops in proptest::collection::vec(any::<bool>(), 0..200)) {
        let mut b = HypervisorBuffer::new(cap);
        let mut drained = 0u64;
        for (i, offer) in ops.into_iter().enumerate() {
            if offer {
                b.offer(Packet { id: i as u64, flow: FlowId(0), seq: i as u64, src: HostId(0), dst: HostId(1) });
            } else {
                drained += b.drain().len() as u64;
            }
            prop_assert!(b.len() <= cap);
            prop_assert_eq!(b.offered(), b.len() as u64 + b.discarded() + drained);
        }
    }

    #[test]
    fn toggle_runs_buffer_consistently(seed in 0u64..500, cap in 0usize..15) {
        let mut s = Scenario::shared_vlan_toggle();
        s.migration.buffer_capacity = cap;
        s.migration.record_trace = true;
        s.traffic.duration = SimTime::from_secs(12);
        let m = s.run(seed).unwrap();
        let c = &m.counters;
        prop_assert!(c.dom0_flushed <= c.dom0_buffered);
        prop_assert_eq!(m.trace.iter().filter(|r| r.kind == "buffer").count() as u64, c.dom0_buffered);
        prop_assert_eq!(m.trace.iter().filter(|r| r.kind == "discard").count() as u64, c.dom0_discarded);
        if cap == 0 {
            prop_assert_eq!(c.dom0_buffered, 0);
        }
    }
}

fn apply(t: &mut FlowTable, m: &FlowMod) {
    match m {
        FlowMod::Install { rule } => {
            t.install(*rule);
        }
        FlowMod::Update { predicate, action } => {
            t.update(predicate, *action);
        }
        FlowMod::Delete { predicate } => {
            t.delete(predicate);
        }
    }
}

/// Gateway tables after replaying every executed command up to each
/// instant, checking that every gateway sends host traffic into a VN that
/// every other gateway currently accepts from.
fn replay_gateways(points: &[RedirectPoint], apps: &[(SimTime, NodeId, &CommandOp)]) -> Vec<(SimTime, String)> {
    let mut tables: BTreeMap<NodeId, FlowTable> = points
        .iter()
        .map(|p| {
            let mut t = FlowTable::new();
            for r in p.initial_rules() {
                t.install(r);
            }
            (p.node, t)
        })
        .collect();
    let probe = Packet { id: 0, flow: FlowId(0), seq: 0, src: HostId(0), dst: HostId(1) };
    let mut violations = Vec::new();
    let mut check = |at: SimTime, tables: &BTreeMap<NodeId, FlowTable>| {
        for a in points {
            let out = tables[&a.node].lookup(&probe, a.host_ports[0], at);
            let side = match out {
                Lookup::Output(p) if p == a.old_port => 0,
                Lookup::Output(p) if Some(p) == a.new_port => 1,
                other => {
                    violations.push((at, format!("{} host traffic {:?}", a.dpid, other)));
                    continue;
                }
            };
            for b in points.iter().filter(|b| b.node != a.node) {
                let port: PortNo = if side == 0 { b.old_port } else { b.new_port.unwrap() };
                if tables[&b.node].lookup(&probe, port, at) != Lookup::Output(b.host_ports[0]) {
                    violations.push((at, format!("{} sends on side {side}, {} rejects it", a.dpid, b.dpid)));
                }
            }
        }
    };
    check(SimTime::ZERO, &tables);
    for (at, node, op) in apps {
        if let CommandOp::FlowMods { mods } = op {
            let t = tables.get_mut(node).unwrap();
            for m in mods {
                apply(t, m);
            }
        }
        check(*at, &tables);
    }
    violations
}

fn gateway_points(hosts: usize, seed: u64) -> Vec<RedirectPoint> {
    let mut s = Scenario::three_host_line();
    s.hosts = hosts;
    RedirectPoint::gateways(&s.build(seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn three_phase_order_keeps_every_host_routable(hosts in 2usize..=6, seed in any::<u64>(), drain in 0u64..50) {
        let points = gateway_points(hosts, seed);
        let sched = build_redirection_schedule(&points, Ordering::Algorithm1, SimTime::from_millis(drain)).unwrap();
        let rec = execute_schedule(&sched, SimTime::ZERO, &CommandChannel::of_message(), &ExecOptions::default(),
            &mut stream(seed, Stream::ChannelLag), &mut stream(seed, Stream::CommandLoss));
        let apps: Vec<_> = rec.applications(&sched).into_iter().map(|a| (a.at, a.target, a.op)).collect();
        let v = replay_gateways(&points, &apps);
        prop_assert!(v.is_empty(), "{:?}", v);
    }

    #[test]
    fn phases_are_emitted_in_order(hosts in 2usize..=6, seed in any::<u64>(),
                                   ordering in prop_oneof![Just(Ordering::Algorithm1), Just(Ordering::Simultaneous), Just(Ordering::PseudocodeLiteral)]) {
        let points = gateway_points(hosts, seed);
        let sched = build_redirection_schedule(&points, ordering, SimTime::from_millis(5)).unwrap();
        let phases: Vec<usize> = sched.sequence().map(|(p, _)| p).collect();
        prop_assert!(phases.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(phases.len(), sched.command_count());
    }

    #[test]
    fn lost_commands_fail_closed(hosts in 2usize..=5, seed in any::<u64>(), p in 0.3f64..1.0) {
        let points = gateway_points(hosts, seed);
        let sched = build_redirection_schedule(&points, Ordering::Algorithm1, SimTime::from_millis(10)).unwrap();
        let opts = ExecOptions { loss_probability: p, ..ExecOptions::default() };
        let rec = execute_schedule(&sched, SimTime::ZERO, &CommandChannel::of_message(), &opts,
            &mut stream(seed, Stream::ChannelLag), &mut stream(seed, Stream::CommandLoss));
        let apps: Vec<_> = rec.applications(&sched).into_iter().map(|a| (a.at, a.target, a.op)).collect();
        if rec.abort.is_some() {
            // After rollback every gateway uses and accepts the old VN again.
            let v = replay_gateways(&points, &apps);
            prop_assert!(v.iter().all(|(at, _)| *at < rec.finished), "{:?}", v);
            let mut tables: BTreeMap<NodeId, FlowTable> = BTreeMap::new();
            for pt in &points {
                let mut t = FlowTable::new();
                for r in pt.initial_rules() { t.install(r); }
                tables.insert(pt.node, t);
            }
            for (_, node, op) in &apps {
                if let CommandOp::FlowMods { mods } = op {
                    for m in mods { apply(tables.get_mut(node).unwrap(), m); }
                }
            }
            let probe = Packet { id: 0, flow: FlowId(0), seq: 0, src: HostId(0), dst: HostId(1) };
            for pt in &points {
                prop_assert_eq!(tables[&pt.node].lookup(&probe, pt.host_ports[0], rec.finished), Lookup::Output(pt.old_port));
                prop_assert_eq!(tables[&pt.node].lookup(&probe, pt.old_port, rec.finished), Lookup::Output(pt.host_ports[0]));
            }
        }
    }
}

#[test]
fn staggered_simultaneous_swaps_break_routability() {
    let points = gateway_points(3, 9);
    let sched = build_redirection_schedule(&points, Ordering::Simultaneous, SimTime::ZERO).unwrap();
    let rec = execute_schedule(&sched, SimTime::ZERO, &CommandChannel::of_message(), &ExecOptions::default(),
        &mut stream(9, Stream::ChannelLag), &mut stream(9, Stream::CommandLoss));
    let apps: Vec<_> = rec.applications(&sched).into_iter().map(|a| (a.at, a.target, a.op)).collect();
    assert!(!replay_gateways(&points, &apps).is_empty());
}

#[test]
fn zero_buffer_toggle_matches_gateway_deliveries() {
    let mut toggle = Scenario::shared_vlan_toggle();
    toggle.migration.buffer_capacity = 0;
    toggle.migration.channel = CommandChannel::ideal();
    toggle.migration.record_trace = true;
    toggle.traffic.duration = SimTime::from_secs(10);
    let mut gw = toggle.clone();
    gw.layout = Layout::Gateway;
    gw.migration.strategy = Mode::Gateway;
    for seed in 0..5 {
        let t = toggle.run(seed).unwrap();
        let g = gw.run(seed).unwrap();
        assert_eq!(t.counters.learning_conflicts, 0);
        let set = |m: &MigrationMetrics| -> BTreeSet<u64> {
            m.trace.iter().filter(|r| r.kind == "deliver").map(|r| r.packet.unwrap()).collect()
        };
        assert_eq!(set(&t), set(&g), "seed {seed}");
    }
}

#[test]
fn cross_aggregate_keeps_the_logical_graph() {
    for seed in 0..20 {
        let mut s = Scenario::three_host_line();
        s.vn = common::random_shape(6, 3, seed);
        let same = s.build(seed).unwrap();
        s.layout = Layout::CrossAggregate;
        let cross = s.build(seed).unwrap();
        for side in [vnmig::topology::VnSide::Old, vnmig::topology::VnSide::New] {
            let edges = |t: &vnmig::topology::ScenarioTopology| -> BTreeSet<(usize, usize)> {
                t.vn(side).edges.iter().map(|e| (e.a.min(e.b), e.a.max(e.b))).collect()
            };
            assert_eq!(edges(&same), edges(&cross));
            assert_eq!(same.vn(side).switches.len(), cross.vn(side).switches.len());
        }
    }
}

#[test]
fn certain_command_loss_aborts_and_restores_old_vn() {
    let points = gateway_points(3, 4);
    let sched = build_redirection_schedule(&points, Ordering::Algorithm1, SimTime::from_millis(10)).unwrap();
    let opts = ExecOptions { loss_probability: 1.0, ..ExecOptions::default() };
    let rec = execute_schedule(&sched, SimTime::ZERO, &CommandChannel::of_message(), &opts,
        &mut stream(4, Stream::ChannelLag), &mut stream(4, Stream::CommandLoss));
    assert!(rec.abort.is_some());
    let apps: Vec<_> = rec.applications(&sched).into_iter().map(|a| (a.at, a.target, a.op)).collect();
    assert!(replay_gateways(&points, &apps).is_empty());
}
