use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::MigrationMetrics;
use crate::topology::{HostId, ScenarioTopology, VnSide};

/// Packets lost when two gateways switch a bidirectional flow pair at
/// different times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    /// Loss of the flow from gateway 1 to gateway 2, in fractional packets.
    pub c_fwd: f64,
    pub c_rev: f64,
    /// `floor` of the fractional values.
    pub c_fwd_packets: u64,
    pub c_rev_packets: u64,
    pub t12_ms: f64,
    pub t21_ms: f64,
    pub d1_ms: f64,
    pub d2_ms: f64,
    pub r1_pps: f64,
    pub r2_pps: f64,
}

impl LossEstimate {
    pub fn total(&self) -> f64 {
        self.c_fwd + self.c_rev
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LossError {
    #[error("latency {0} ms must be positive")]
    NonPositiveLatency(f64),
    #[error("rate {0} pkt/s must be non-negative")]
    NegativeRate(f64),
    #[error("time {0} is not finite")]
    NotFinite(f64),
}

fn one_way(lead: f64, d: f64, r: f64) -> f64 {
    // `lead` is how long after the sender's gateway the receiver's gateway switches.
    let c = if lead >= d { (lead - d) * r } else { (d - lead) * r };
    c / 1000.0
}

/// Loss of the flows `1 -> 2` (rate `r1`, latency `d1`) and `2 -> 1`
/// (rate `r2`, latency `d2`) when gateway 1 switches at `t12` and gateway 2
/// at `t21`, each switch being an atomic swap of accepted and used VN.
/// Times in ms, rates in packets per second.
pub fn analytic_loss(t12: f64, t21: f64, d1: f64, d2: f64, r1: f64, r2: f64) -> Result<LossEstimate, LossError> {
    for v in [t12, t21, d1, d2, r1, r2] {
        if !v.is_finite() {
            return Err(LossError::NotFinite(v));
        }
    }
    for d in [d1, d2] {
        if d <= 0.0 {
            return Err(LossError::NonPositiveLatency(d));
        }
    }
    for r in [r1, r2] {
        if r < 0.0 {
            return Err(LossError::NegativeRate(r));
        }
    }
    let c_fwd = one_way(t21 - t12, d1, r1);
    let c_rev = one_way(t12 - t21, d2, r2);
    Ok(LossEstimate {
        c_fwd,
        c_rev,
        c_fwd_packets: c_fwd.floor() as u64,
        c_rev_packets: c_rev.floor() as u64,
        t12_ms: t12,
        t21_ms: t21,
        d1_ms: d1,
        d2_ms: d2,
        r1_pps: r1,
        r2_pps: r2,
    })
}

/// Measured and predicted loss of one flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionCheck {
    pub src: HostId,
    pub dst: HostId,
    pub measured: u64,
    pub predicted: f64,
}

impl DirectionCheck {
    pub fn deviation(&self) -> f64 {
        (self.measured as f64 - self.predicted).abs()
    }
}

/// Evaluates the loss formula for every flow of a gateway run, using the
/// recorded switch-over times and the old-VN gateway-to-gateway latencies.
pub fn predicted_loss(topo: &ScenarioTopology, metrics: &MigrationMetrics) -> Vec<DirectionCheck> {
    let Some(m) = &metrics.migration else { return Vec::new() };
    let at = |h: HostId| m.switch_overs.iter().find(|s| s.host == h).map(|s| s.at.as_millis_f64());
    let mut out = Vec::new();
    for f in &metrics.flows {
        let (Some(ga), Some(gb)) = (topo.gateway_for_host(f.src), topo.gateway_for_host(f.dst)) else { continue };
        let (Some(ta), Some(tb)) = (at(f.src), at(f.dst)) else { continue };
        let Some(d) = topo.gateway_path_latency(ga.node, gb.node, VnSide::Old) else { continue };
        let Ok(est) = analytic_loss(ta, tb, d.as_millis_f64(), d.as_millis_f64(), f.rate_pps, f.rate_pps) else {
            continue;
        };
        out.push(DirectionCheck { src: f.src, dst: f.dst, measured: f.lost, predicted: est.c_fwd });
    }
    out
}
