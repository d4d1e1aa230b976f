//! Loads a TOML scenario file and runs it, the way the `vnmig run`
//! subcommand does.
//!
//!     cargo run --example scenario_file -- scenarios/two_node.toml

use vnmig::cli::load_scenario_file;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/two_node.toml").into());
    let file = load_scenario_file(path.as_ref())?;
    let scenario = file.to_scenario()?;
    let m = scenario.run(file.seed)?;
    println!("{path}: {} hosts, {:?} layout, seed {}", scenario.hosts, scenario.layout, file.seed);
    for f in &m.flows {
        println!("  {} -> {}: sent {}, lost {}", f.src, f.dst, f.sent, f.lost);
    }
    if let Some(a) = m.abort() {
        println!("  migration aborted: {a}");
    }
    Ok(())
}
