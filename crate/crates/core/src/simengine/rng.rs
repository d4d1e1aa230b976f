use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams derived from one scenario seed.
///
/// Each consumer draws from its own ChaCha stream so that adding draws in one
/// place never shifts the values seen by another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    PortShuffle = 1,
    ChannelLag = 2,
    CommandLoss = 3,
    Workload = 4,
    Experiment = 5,
}

pub type SimRng = ChaCha8Rng;

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
