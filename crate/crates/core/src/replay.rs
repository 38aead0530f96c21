//! Fixed-capacity FIFO experience storage shared by the replay-based
//! learners.

use rand::Rng as _;

use crate::seed::Rng;

#[derive(Debug, Clone)]
pub struct RingBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    cursor: usize,
}

impl<T> RingBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "ring buffer capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            cursor: 0,
        }
    }

    /// Inserts, overwriting the oldest item once full.
    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, idx: usize) -> &T {
        &self.items[idx]
    }

    pub fn sample(&self, rng: &mut Rng) -> &T {
        &self.items[rng.gen_range(0..self.items.len())]
    }

    /// Indices of `n` uniform draws with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut Rng) -> Vec<usize> {
        (0..n).map(|_| rng.gen_range(0..self.items.len())).collect()
    }
}
