use alloc::vec::Vec;

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// True terminal (goal, collision, battery); step-budget truncation is not.
    pub terminal: bool,
}

/// Fixed-capacity FIFO experience replay.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            items: Vec::new(),
            next: 0,
        }
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

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Oldest entry still held.
    pub fn oldest(&self) -> Option<&Transition> {
        if self.items.len() < self.capacity {
            self.items.first()
        } else {
            self.items.get(self.next)
        }
    }

    /// `n` entries drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn t(i: usize) -> Transition {
        Transition {
            obs: vec![i as f64],
            action: i,
            reward: 0.0,
            next_obs: vec![],
            terminal: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(t(i));
            assert!(b.len() <= 3);
        }
        assert_eq!(b.oldest().unwrap().action, 2);
        let mut held: Vec<usize> = b.items.iter().map(|x| x.action).collect();
        held.sort();
        assert_eq!(held, vec![2, 3, 4]);
    }
}
