use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use super::reward::Outcome;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Executed action in `[0, 1]²`.
    pub action: [f64; 2],
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: Option<Outcome>,
}

impl Transition {
    pub fn is_terminal(&self) -> bool {
        self.done.is_some_and(Outcome::is_terminal)
    }
}

/// Bounded FIFO store of transitions with uniform sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)) })
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
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

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Result<Vec<&'a Transition>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBatch);
        }
        Ok((0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(reward: f64) -> Transition {
        Transition { state: vec![0.0], action: [0.5, 0.5], reward, next_state: vec![0.0], done: None }
    }

    #[test]
    fn empty_buffer_cannot_sample() {
        let b = ReplayBuffer::new(4).unwrap();
        assert!(matches!(b.sample(1, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::EmptyBatch)));
        assert!(ReplayBuffer::new(0).is_err());
    }

    #[test]
    fn timeout_is_not_terminal() {
        let mut x = t(0.0);
        x.done = Some(Outcome::Timeout);
        assert!(!x.is_terminal());
        x.done = Some(Outcome::Collision);
        assert!(x.is_terminal());
    }

    #[test]
    fn sampling_covers_contents_uniformly() {
        let mut b = ReplayBuffer::new(4).unwrap();
        for i in 0..4 {
            b.push(t(i as f64));
        }
        let mut counts = [0usize; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for x in b.sample(40_000, &mut rng).unwrap() {
            counts[x.reward as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 - 10_000.0).abs() < 400.0), "{counts:?}");
    }

    proptest! {
        #[test]
        fn bounded_fifo(cap in 1usize..20, n in 0usize..60) {
            let mut b = ReplayBuffer::new(cap).unwrap();
            for i in 0..n {
                b.push(t(i as f64));
            }
            prop_assert_eq!(b.len(), n.min(cap));
            // oldest surviving item is the (n − len)-th pushed
            if n > 0 {
                prop_assert_eq!(b.get(0).unwrap().reward, (n - b.len()) as f64);
            }
        }
    }
}
