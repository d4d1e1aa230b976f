//! Reproduces the outage caused by toggling interfaces on a VLAN shared by
//! both VNs: buffered packets replayed on interface-up make the learning
//! switch see a host on a second port and blackhole it. The gateway
//! strategy on the same parameters loses nothing.
//!
//!     cargo run --example broadcast_hazard

use vnmig::controller::{Scenario, Strategy};
use vnmig::topology::Layout;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 3;
    let toggle = Scenario::shared_vlan_toggle();
    let m = toggle.run(seed)?;
    println!("interface toggle (buffer {} packets):", toggle.migration.buffer_capacity);
    for f in &m.flows {
        let start = f.max_gap_start.map_or(0.0, |t| t.as_secs_f64());
        println!("  {} -> {}: outage {:.2} s from t={start:.2} s, lost {}", f.src, f.dst, f.max_gap.as_secs_f64(), f.lost);
    }
    println!(
        "  learning conflicts {}, dom0 buffered {}, flushed {}",
        m.counters.learning_conflicts, m.counters.dom0_buffered, m.counters.dom0_flushed
    );

    let mut gw = toggle.clone();
    gw.layout = Layout::Gateway;
    gw.migration.strategy = Strategy::Gateway;
    let g = gw.run(seed)?;
    let mut base = gw.clone();
    base.migration.strategy = Strategy::None;
    let b = base.run(seed)?;
    println!("\ngateway: lost {}, baseline lost {}, max gap {:.2} ms", g.total_lost(), b.total_lost(), g.max_gap().as_millis_f64());
    Ok(())
}
