use rand::Rng as _;

use crate::env::Transition;
use crate::error::{invalid, Result};
use crate::rng::Rng;

/// One stored step. `terminal` marks a true environment termination;
/// horizon cut-offs are stored as non-terminal so values bootstrap.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredStep {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<StoredStep>,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            next: 0,
            inserted: 0,
        })
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

    /// Total insertions since creation, including overwritten ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Stored steps from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &StoredStep> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    pub fn push(&mut self, step: StoredStep) {
        if self.items.len() < self.capacity {
            self.items.push(step);
        } else {
            self.items[self.next] = step;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    pub fn push_transition(&mut self, t: &Transition, terminal: bool) {
        self.push(StoredStep {
            state: t.state.clone(),
            action: t.action.clone(),
            reward: t.reward,
            next_state: t.next_state.clone(),
            terminal,
        });
    }

    /// Uniform draw with replacement. `None` while fewer than `batch`
    /// items are stored.
    pub fn sample(&self, batch: usize, rng: &mut Rng) -> Option<Vec<&StoredStep>> {
        if batch == 0 || self.items.len() < batch {
            return None;
        }
        Some(
            (0..batch)
                .map(|_| &self.items[rng.random_range(0..self.items.len())])
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn step(r: f64) -> StoredStep {
        StoredStep {
            state: vec![r],
            action: vec![0.0],
            reward: r,
            next_state: vec![r],
            terminal: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            buf.push(step(i as f64));
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.inserted(), 5);
        let rewards: Vec<f64> = buf.iter().map(|s| s.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_needs_enough_items() {
        let mut rng = SeedTree::new(1).rng();
        let mut buf = ReplayBuffer::new(10).unwrap();
        buf.push(step(1.0));
        assert!(buf.sample(2, &mut rng).is_none());
        buf.push(step(2.0));
        assert_eq!(buf.sample(2, &mut rng).unwrap().len(), 2);
        assert!(ReplayBuffer::new(0).is_err());
    }
}
