//! Loss against round-trip time for the three-phase and simultaneous
//! orderings, with a least-squares line through the simultaneous points.
//!
//!     cargo run --release --example rtt_sweep

use vnmig::analysis::{linear_fit, sweep_rtt};
use vnmig::controller::{CommandChannel, Ordering, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut s = Scenario::three_host_line();
    s.migration.channel = CommandChannel::ideal();
    let rtts = [10.0, 50.0, 100.0, 150.0, 200.0];
    let rows = sweep_rtt(&s, &rtts, &[Ordering::Algorithm1, Ordering::Simultaneous], 5, 1)?;

    println!("{:>8} {:>14} {:>10} {:>10}", "rtt ms", "ordering", "lost", "formula");
    for r in &rows {
        let pred = r.mean_predicted.map_or("-".to_string(), |p| format!("{p:.1}"));
        println!("{:>8} {:>14} {:>10.1} {:>10}", r.rtt_ms, r.ordering.to_string(), r.mean_lost, pred);
    }

    let sym: Vec<_> = rows.iter().filter(|r| r.ordering == Ordering::Simultaneous).collect();
    let xs: Vec<f64> = sym.iter().map(|r| r.rtt_ms).collect();
    let ys: Vec<f64> = sym.iter().map(|r| r.mean_lost).collect();
    if let Some(fit) = linear_fit(&xs, &ys) {
        println!("\nsimultaneous: {:.3} packets per ms of RTT, r^2 = {:.4}", fit.slope, fit.r_squared);
    }
    Ok(())
}
