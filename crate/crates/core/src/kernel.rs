//! Discrete-event engine: simulation clock, ordered event queue and seeded
//! random streams.
//!
//! Events are delivered in ascending `(fire_at, seq)` order, where `seq` is a
//! per-kernel insertion counter. Two events scheduled for the same instant are
//! therefore delivered in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulation time in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(ms: f64) -> Result<Self, KernelError> {
        if ms.is_finite() && ms >= 0.0 {
            Ok(SimTime(ms))
        } else {
            Err(KernelError::InvalidTime(ms))
        }
    }

    pub fn as_ms(self) -> f64 {
        self.0
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}ms", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventId(pub u64);

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid time value {0} (must be finite and non-negative)")]
    InvalidTime(f64),
    #[error("negative or non-finite delay {0}")]
    NegativeDelay(f64),
    #[error("cannot schedule at {at} which is before the current clock {now}")]
    InThePast { at: SimTime, now: SimTime },
    #[error("simulation already terminated")]
    Terminated,
    #[error("invalid interval: min {min} > max {max}")]
    InvalidInterval { min: f64, max: f64 },
    #[error("handler for {kind} event at {at} failed: {message}")]
    Dispatch {
        kind: &'static str,
        at: SimTime,
        message: String,
    },
}

/// Gives each event payload a stable name for diagnostics and logs.
pub trait EventKind {
    fn kind_name(&self) -> &'static str;
}

/// An event popped from the queue.
#[derive(Clone, Debug)]
pub struct Event<E> {
    pub id: EventId,
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: E,
}

struct Queued<E>(Event<E>);

impl<E> PartialEq for Queued<E> {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}

impl<E> Eq for Queued<E> {}

impl<E> PartialOrd for Queued<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Queued<E> {
    // BinaryHeap is a max-heap, so the ordering is reversed.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .fire_at
            .cmp(&self.0.fire_at)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

/// The event queue and clock of one simulation run.
pub struct Kernel<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Queued<E>>,
    terminated: bool,
}

impl<E> Default for Kernel<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Kernel<E> {
    pub fn new() -> Self {
        Kernel {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            terminated: false,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Iterates over queued events in no particular order.
    pub fn queued(&self) -> impl Iterator<Item = &Event<E>> {
        self.queue.iter().map(|q| &q.0)
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// Enqueues `payload` to fire `delay` ms after the current clock.
    pub fn schedule(&mut self, payload: E, delay: f64) -> Result<EventId, KernelError> {
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(KernelError::NegativeDelay(delay));
        }
        let at = SimTime::new(self.now.0 + delay)?;
        self.schedule_at(payload, at)
    }

    /// Enqueues `payload` at an absolute time, which must not precede the clock.
    pub fn schedule_at(&mut self, payload: E, at: SimTime) -> Result<EventId, KernelError> {
        if self.terminated {
            return Err(KernelError::Terminated);
        }
        if at < self.now {
            return Err(KernelError::InThePast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let id = EventId(seq);
        self.queue.push(Queued(Event {
            id,
            fire_at: at,
            seq,
            payload,
        }));
        Ok(id)
    }

    /// Time of the next queued event, if any.
    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|q| q.0.fire_at)
    }

    /// Marks the run as finished; further scheduling is rejected.
    pub fn terminate(&mut self) {
        self.terminated = true;
    }
}

impl<E: EventKind> Kernel<E> {
    /// Dispatches events in `(fire_at, seq)` order until the queue is empty or
    /// the next event lies beyond `t_end`. Returns the final clock value.
    ///
    /// A handler error aborts the run; the error names the event kind and
    /// the time it fired.
    pub fn run_until<F, Err>(&mut self, t_end: SimTime, mut handler: F) -> Result<SimTime, KernelError>
    where
        F: FnMut(&mut Kernel<E>, Event<E>) -> Result<(), Err>,
        Err: fmt::Display,
    {
        while let Some(next) = self.peek_time() {
            if next > t_end || self.terminated {
                break;
            }
            let Queued(event) = self.queue.pop().expect("peeked");
            self.now = event.fire_at;
            let kind = event.payload.kind_name();
            let at = event.fire_at;
            handler(self, event).map_err(|e| KernelError::Dispatch {
                kind,
                at,
                message: e.to_string(),
            })?;
        }
        Ok(self.now)
    }
}

/// A named, seeded random stream.
///
/// Streams are ChaCha8 generators seeded from `(seed, name)`, so a stream's
/// sequence depends only on the scenario seed and the stream's name.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

pub const RNG_ALGORITHM: &str = "chacha8";

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derives an independent stream for `name` from a run seed.
    pub fn named(seed: u64, name: &str) -> Self {
        // FNV-1a over the name, folded into the seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Self::new(seed ^ h.rotate_left(17))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform sample in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform sample in `[min, max)`; `min` itself when the interval is empty.
    pub fn sample_uniform(&mut self, min: f64, max: f64) -> Result<f64, KernelError> {
        if min.is_nan() || max.is_nan() || min > max {
            return Err(KernelError::InvalidInterval { min, max });
        }
        let value = min + (max - min) * self.next_unit();
        // Guard against rounding up to `max` on very wide intervals.
        Ok(if value >= max && max > min { min } else { value })
    }

    /// Uniform integer in `[min, max)`; `min` when the interval is empty.
    pub fn sample_int(&mut self, min: i64, max: i64) -> Result<i64, KernelError> {
        if min > max {
            return Err(KernelError::InvalidInterval {
                min: min as f64,
                max: max as f64,
            });
        }
        if min == max {
            return Ok(min);
        }
        Ok(self.rng.gen_range(min..max))
    }

    /// Bernoulli trial with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            return true;
        }
        if p <= 0.0 {
            return false;
        }
        self.next_unit() < p
    }
}
