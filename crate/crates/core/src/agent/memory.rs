use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::policy::ActionMask;

/// One transition. `next_masks` restrict the bootstrap argmax; they are
/// empty for terminal transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub observation: Vec<f64>,
    pub actions: Vec<usize>,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub next_masks: Vec<ActionMask>,
    pub terminal: bool,
}

/// First-in first-out experience store.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// `count` distinct experiences, uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<&Experience> {
        index::sample(rng, self.items.len(), count.min(self.items.len()))
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}
