use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use super::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("event scheduled at {at} which is before the current clock {now}")]
    PastTime { at: SimTime, now: SimTime },
}

/// A scheduled event: `(time, sequence)` is the dequeue key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent<A> {
    pub time: SimTime,
    pub sequence: u64,
    pub action: A,
}

struct Entry<A>(SimEvent<A>);

impl<A> PartialEq for Entry<A> {
    fn eq(&self, other: &Self) -> bool {
        self.0.time == other.0.time && self.0.sequence == other.0.sequence
    }
}

impl<A> Eq for Entry<A> {}

impl<A> PartialOrd for Entry<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<A> Ord for Entry<A> {
    // BinaryHeap is a max-heap; invert so the earliest (time, sequence) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.time, other.0.sequence).cmp(&(self.0.time, self.0.sequence))
    }
}

/// Deterministic discrete-event core: a clock plus a `(time, sequence)` ordered queue.
pub struct Engine<A> {
    now: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<Entry<A>>,
    processed: u64,
}

impl<A> Default for Engine<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> Engine<A> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|e| e.0.time)
    }

    pub fn schedule(&mut self, time: SimTime, action: A) -> Result<u64, EngineError> {
        if time < self.now {
            return Err(EngineError::PastTime { at: time, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Entry(SimEvent { time, sequence, action }));
        Ok(sequence)
    }

    /// Pops the next event if it is due at or before `t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<SimEvent<A>> {
        match self.queue.peek() {
            Some(e) if e.0.time <= t_end => {}
            _ => return None,
        }
        let Entry(ev) = self.queue.pop()?;
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        self.processed += 1;
        Some(ev)
    }

    /// Processes every event due at or before `t_end` and returns them in order.
    ///
    /// The handler may schedule further events through the engine reference.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Vec<SimEvent<A>>
    where
        A: Clone,
        F: FnMut(&SimEvent<A>, &mut Engine<A>),
    {
        let mut log = Vec::new();
        while let Some(ev) = self.pop_until(t_end) {
            handler(&ev, self);
            log.push(ev);
        }
        log
    }
}
