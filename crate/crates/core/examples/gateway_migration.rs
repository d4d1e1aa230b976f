//! Migrates the three-host, six-switch line scenario with each redirection
//! ordering and prints per-flow loss next to a migration-free baseline.
//!
//!     cargo run --example gateway_migration

use vnmig::controller::{CommandChannel, Ordering, Scenario, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 7;
    let mut base = Scenario::three_host_line();
    base.migration.channel = CommandChannel::ideal();

    let mut baseline = base.clone();
    baseline.migration.strategy = Strategy::None;
    let b = baseline.run(seed)?;
    println!("baseline: {} sent, {} lost", b.total_sent(), b.total_lost());

    for ordering in [Ordering::Algorithm1, Ordering::Simultaneous, Ordering::PseudocodeLiteral] {
        let mut s = base.clone();
        s.migration.ordering = ordering;
        let m = s.run(seed)?;
        let t = m.migration.as_ref().expect("gateway run has a timeline");
        println!(
            "\n{ordering}: duration {:.2} ms, drain delay {:.2} ms, {} commands",
            t.duration.as_millis_f64(),
            t.drain_delay.as_millis_f64(),
            t.commands.len()
        );
        for f in &m.flows {
            println!("  {} -> {}: lost {:>3} ({:.3}%)  max gap {:.2} ms", f.src, f.dst, f.lost, f.loss_pct, f.max_gap.as_millis_f64());
        }
    }
    Ok(())
}
