//! Evaluates the closed-form loss of two gateways redirecting a
//! bidirectional flow at different times.
//!
//!     cargo run --example loss_formula

use vnmig::analysis::analytic_loss;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (d, r) = (20.0, 1000.0);
    println!("one-way latency {d} ms, {r} pkt/s each way");
    println!("{:>10} {:>10} {:>10} {:>10}", "t21-t12", "c_fwd", "c_rev", "total");
    for lead in [-40.0, -20.0, -10.0, 0.0, 10.0, 20.0, 40.0] {
        let e = analytic_loss(0.0, lead, d, d, r, r)?;
        println!("{lead:>10} {:>10.1} {:>10.1} {:>10.1}", e.c_fwd, e.c_rev, e.total());
    }
    println!("the total never drops below {:.1} packets", d * r / 1000.0 * 2.0);
    Ok(())
}
