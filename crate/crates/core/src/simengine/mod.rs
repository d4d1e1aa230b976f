//! Discrete-event core: fixed-point clock, `(time, sequence)` ordered queue,
//! link serialization, CBR sources, and seeded random streams.

mod link;
mod queue;
pub mod rng;
mod time;
mod traffic;

pub use link::{LinkDirection, Transmission};
pub use queue::{Engine, EngineError, SimEvent};
pub use rng::{SimRng, Stream};
pub use time::SimTime;
pub use traffic::{cbr_generate, FlowId, HostFlow, SourceTick};
