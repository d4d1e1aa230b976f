use serde::{Deserialize, Serialize};

use super::SimTime;
use crate::topology::HostId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub u32);

/// Constant-bit-rate UDP-style flow between two hosts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostFlow {
    pub id: FlowId,
    pub src: HostId,
    pub dst: HostId,
    /// Packets per second.
    pub rate: f64,
    pub start: SimTime,
    pub duration: SimTime,
    /// Carried for reporting only.
    pub packet_size: u32,
}

/// One emission of a CBR source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceTick {
    pub flow: FlowId,
    pub sequence: u64,
    pub time: SimTime,
}

impl HostFlow {
    pub fn packet_count(&self) -> u64 {
        if self.rate <= 0.0 {
            return 0;
        }
        (self.rate * self.duration.as_secs_f64()).round() as u64
    }

    /// Emission time of packet `k`: `start + k / rate`, floored to the microsecond.
    pub fn emission_time(&self, k: u64) -> SimTime {
        let offset = (k as f64 * 1_000_000.0 / self.rate).floor() as u64;
        self.start + SimTime(offset)
    }

    pub fn end(&self) -> SimTime {
        self.start + self.duration
    }
}

/// Expands a flow into its full source-tick stream.
pub fn cbr_generate(flow: &HostFlow) -> impl Iterator<Item = SourceTick> + '_ {
    (0..flow.packet_count()).map(move |k| SourceTick {
        flow: flow.id,
        sequence: k,
        time: flow.emission_time(k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow(id: u32, rate: f64, secs: u64) -> HostFlow {
        HostFlow {
            id: FlowId(id),
            src: HostId(0),
            dst: HostId(1),
            rate,
            start: SimTime::ZERO,
            duration: SimTime::from_secs(secs),
            packet_size: 1470,
        }
    }

    #[test]
    fn hundred_pps_for_ten_seconds() {
        let f = flow(0, 100.0, 10);
        let ticks: Vec<_> = cbr_generate(&f).collect();
        assert_eq!(ticks.len(), 1000);
        assert!(ticks.iter().enumerate().all(|(i, t)| t.sequence == i as u64));
        assert_eq!(ticks[1].time, SimTime::from_millis(10));
        assert_eq!(ticks[999].time, SimTime::from_millis(9_990));
    }

    #[test]
    fn interleaving_is_a_function_of_timestamps_only() {
        let a = flow(0, 300.0, 1);
        let b = HostFlow { id: FlowId(1), start: SimTime(700), ..flow(1, 170.0, 1) };
        let merge = |first: &HostFlow, second: &HostFlow| {
            let mut all: Vec<_> = cbr_generate(first).chain(cbr_generate(second)).collect();
            all.sort_by_key(|t| (t.time, t.flow));
            all
        };
        assert_eq!(merge(&a, &b), merge(&b, &a));
    }
}
