use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

#[derive(Debug)]
struct Inner {
    data: VecDeque<f64>,
    capacity: usize,
    /// Samples pushed since creation.
    clock: u64,
}

/// Fixed-capacity audio window shared between one producer and one
/// consumer. Clones are handles to the same buffer.
#[derive(Debug, Clone)]
pub struct AudioRing {
    inner: Arc<Mutex<Inner>>,
}

/// Copy of the window at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct RingSnapshot {
    /// Absolute index of `samples[0]`.
    pub start: u64,
    pub samples: Vec<f64>,
}

impl RingSnapshot {
    /// Absolute index one past the newest sample.
    pub fn end(&self) -> u64 {
        self.start + self.samples.len() as u64
    }
}

impl AudioRing {
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: Arc::new(Mutex::new(Inner {
                data: VecDeque::with_capacity(capacity),
                capacity,
                clock: 0,
            })),
        }
    }

    /// Appends samples, dropping the oldest beyond capacity.
    pub fn push(&self, chunk: &[f64]) {
        let mut g = self.inner.lock().expect("ring lock poisoned");
        let cap = g.capacity;
        let tail = &chunk[chunk.len().saturating_sub(cap)..];
        let overflow = (g.data.len() + tail.len()).saturating_sub(cap);
        g.data.drain(..overflow);
        g.data.extend(tail);
        g.clock += chunk.len() as u64;
    }

    pub fn clock(&self) -> u64 {
        self.inner.lock().expect("ring lock poisoned").clock
    }

    pub fn capacity(&self) -> usize {
        self.inner.lock().expect("ring lock poisoned").capacity
    }

    pub fn snapshot(&self) -> RingSnapshot {
        let g = self.inner.lock().expect("ring lock poisoned");
        RingSnapshot {
            start: g.clock - g.data.len() as u64,
            samples: g.data.iter().copied().collect(),
        }
    }
}
