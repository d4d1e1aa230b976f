//! Records what the client application sees during a migration and checks
//! that no new-VN datapath id or port ever reaches it.
//!
//!     cargo run --example presenter_transparency

use std::collections::BTreeSet;

use vnmig::controller::{migrate, Scenario};
use vnmig::topology::VnSide;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 5;
    let mut s = Scenario::three_host_line();
    s.traffic.duration = vnmig::simengine::SimTime::from_secs(6);
    s.migration.record_events = true;
    let topo = s.build(seed)?;
    let m = migrate(&topo, &s.flows(), &s.migration, seed)?;

    let new_dpids: BTreeSet<_> = topo.vn(VnSide::New).dpids.iter().copied().collect();
    let leaked = m.client_events.iter().filter(|e| new_dpids.contains(&e.event.dpid())).count();
    println!("client events: {}, mentioning a new-VN switch: {leaked}", m.client_events.len());
    for (reason, n) in &m.suppressed {
        println!("  suppressed {reason:?}: {n}");
    }

    let switch_at = m.migration.as_ref().and_then(|t| t.phase_done.last().copied());
    let mut kinds = std::collections::BTreeMap::<&str, (u64, u64)>::new();
    for e in &m.client_events {
        let after = switch_at.is_some_and(|t| e.time >= t);
        let name = match e.event {
            vnmig::controller::SwitchEvent::PacketIn { .. } => "packet-in",
            vnmig::controller::SwitchEvent::FlowRemoved { .. } => "flow-removed",
            vnmig::controller::SwitchEvent::PortStatus { .. } => "port-status",
            _ => "switch",
        };
        let k = kinds.entry(name).or_default();
        if after { k.1 += 1 } else { k.0 += 1 }
    }
    for (k, (before, after)) in kinds {
        println!("  {k:>13}: {before} before redirection, {after} after");
    }
    Ok(())
}
