//! Empirical lag distributions of the ssh and OpenFlow-message command
//! channels.
//!
//!     cargo run --example lag_cdf

use vnmig::analysis::channel_lag_cdf;
use vnmig::controller::{ChannelKind, CommandChannel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for kind in [ChannelKind::OfMessage, ChannelKind::Ssh] {
        let cdf = channel_lag_cdf(&CommandChannel::of_kind(kind), 50, 42)?;
        println!(
            "{kind:>10}: p10 {:>7.1} ms  median {:>7.1} ms  p90 {:>7.1} ms  max {:>7.1} ms",
            cdf.quantile(0.1),
            cdf.median(),
            cdf.quantile(0.9),
            cdf.max()
        );
    }
    Ok(())
}
