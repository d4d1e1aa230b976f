//! Migration duration as a function of flow-table size, with an affine fit.
//!
//!     cargo run --release --example table_size

use vnmig::analysis::{linear_fit, sweep_table_size, table_size_template};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let template = table_size_template();
    let sizes = [100, 500, 1000, 5000, 10_000];
    let rows = sweep_table_size(&template, &sizes, 3, 1)?;
    for r in &rows {
        println!("{:>6} rules/switch: {:>9.1} ms", r.rules_per_switch, r.mean_duration_ms);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.rules_per_switch as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_duration_ms).collect();
    let fit = linear_fit(&xs, &ys).expect("distinct sizes");
    println!(
        "\nduration = {:.4} ms/rule * n + {:.2} ms   (r^2 {:.6}, worst residual {:.4}%)",
        fit.slope,
        fit.intercept,
        fit.r_squared,
        fit.max_relative_residual * 100.0
    );
    Ok(())
}
