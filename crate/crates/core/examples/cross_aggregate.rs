//! Migrates between VNs in different aggregates joined by stitched links,
//! and compares it with the same-aggregate layout.
//!
//!     cargo run --example cross_aggregate

use vnmig::controller::{CommandChannel, Scenario};
use vnmig::simengine::SimTime;
use vnmig::topology::{Layout, VnShape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 11;
    let mut s = Scenario::three_host_line();
    s.vn = VnShape::ring(4);
    s.migration.channel = CommandChannel::of_message();
    s.latencies.stitch = SimTime::from_millis(15);

    for layout in [Layout::Gateway, Layout::CrossAggregate] {
        s.layout = layout;
        let topo = s.build(seed)?;
        let m = s.run(seed)?;
        println!(
            "{layout:?}: {} nodes, {} bridges, lost {}, migration {:.1} ms",
            topo.nodes.len(),
            topo.nodes.iter().filter(|n| matches!(n.role, vnmig::topology::NodeRole::Bridge { .. })).count(),
            m.total_lost(),
            m.duration().unwrap_or(SimTime::ZERO).as_millis_f64()
        );
    }
    Ok(())
}
