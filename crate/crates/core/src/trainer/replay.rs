use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

/// One environment step. States are tour prefixes on a training instance;
/// the annotated graph is rebuilt from them on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub instance: usize,
    pub state: Vec<usize>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<usize>,
    /// At most one node is left after `next_state`.
    pub done: bool,
}

/// FIFO replay memory with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    buffer: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buffer.iter()
    }

    /// `min(size, len)` distinct transitions, uniformly without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Vec<&Transition> {
        let k = size.min(self.buffer.len());
        index::sample(rng, self.buffer.len(), k)
            .into_iter()
            .map(|i| &self.buffer[i])
            .collect()
    }
}
