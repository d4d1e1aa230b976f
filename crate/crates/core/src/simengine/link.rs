use serde::{Deserialize, Serialize};

use super::SimTime;

/// Result of handing a packet to one direction of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transmission {
    /// The packet reaches the far end at this time.
    Arrival { departure: SimTime, arrival: SimTime },
    /// The link was removed; the packet is counted and discarded.
    Dropped,
}

/// One direction of a substrate link: fixed latency plus capacity-based
/// serialization (minimum inter-departure spacing of `1 / capacity`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkDirection {
    latency: SimTime,
    spacing: SimTime,
    next_free: SimTime,
    up: bool,
    sent: u64,
    dropped: u64,
}

impl LinkDirection {
    pub fn new(latency: SimTime, capacity_pps: u64) -> Self {
        let spacing = if capacity_pps == 0 {
            SimTime::ZERO
        } else {
            SimTime(1_000_000u64.div_ceil(capacity_pps))
        };
        LinkDirection {
            latency,
            spacing,
            next_free: SimTime::ZERO,
            up: true,
            sent: 0,
            dropped: 0,
        }
    }

    pub fn latency(&self) -> SimTime {
        self.latency
    }

    pub fn is_up(&self) -> bool {
        self.up
    }

    pub fn remove(&mut self) {
        self.up = false;
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn transmit(&mut self, now: SimTime) -> Transmission {
        if !self.up {
            self.dropped += 1;
            return Transmission::Dropped;
        }
        let departure = now.max(self.next_free);
        self.next_free = departure + self.spacing;
        self.sent += 1;
        Transmission::Arrival { departure, arrival: departure + self.latency }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrival_after_latency() {
        let mut link = LinkDirection::new(SimTime::from_millis(10), 1_000_000);
        assert_eq!(
            link.transmit(SimTime::from_millis(100)),
            Transmission::Arrival {
                departure: SimTime::from_millis(100),
                arrival: SimTime::from_millis(110)
            }
        );
    }

    #[test]
    fn capacity_spaces_back_to_back_departures() {
        let mut link = LinkDirection::new(SimTime::from_millis(1), 1_000);
        let t = SimTime::from_millis(5);
        let Transmission::Arrival { departure: d1, .. } = link.transmit(t) else { panic!() };
        let Transmission::Arrival { departure: d2, .. } = link.transmit(t) else { panic!() };
        assert!(d2 - d1 >= SimTime::from_millis(1));
    }

    #[test]
    fn three_hops_sum_latencies() {
        let mut hops: Vec<_> = (0..3).map(|_| LinkDirection::new(SimTime::from_millis(5), 1_000_000)).collect();
        let mut t = SimTime::ZERO;
        for hop in &mut hops {
            match hop.transmit(t) {
                Transmission::Arrival { arrival, .. } => t = arrival,
                Transmission::Dropped => unreachable!(),
            }
        }
        assert_eq!(t, SimTime::from_millis(15));
    }

    #[test]
    fn removed_link_drops_and_counts() {
        let mut link = LinkDirection::new(SimTime::from_millis(1), 0);
        link.remove();
        assert_eq!(link.transmit(SimTime::ZERO), Transmission::Dropped);
        assert_eq!(link.dropped(), 1);
        assert_eq!(link.sent(), 0);
    }
}
