use rand::seq::index;
use rand::Rng;

use crate::env::Observation;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Observation,
    pub a: usize,
    pub r: f64,
    pub s_next: Observation,
    pub done: bool,
}

/// Fixed-capacity ring buffer with uniform sampling without replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), items: Vec::new(), next: 0 }
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

    /// Overwrites the oldest entry once full. Non-finite rewards are a bug
    /// upstream and panic here.
    pub fn push(&mut self, t: Transition) {
        assert!(t.r.is_finite(), "non-finite reward in transition");
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `None` while fewer than `batch` transitions are stored.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if batch == 0 || self.items.len() < batch {
            return None;
        }
        Some(index::sample(rng, self.items.len(), batch).into_iter().map(|i| &self.items[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        Transition { s: Observation::new(vec![r]), a: 0, r, s_next: Observation::new(vec![r]), done: false }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for k in 0..5 {
            b.push(t(k as f64));
        }
        assert_eq!(b.len(), 3);
        let mut rs: Vec<f64> = b.items.iter().map(|x| x.r).collect();
        rs.sort_by(f64::total_cmp);
        assert_eq!(rs, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_requires_enough_and_has_no_repeats() {
        let mut b = ReplayBuffer::new(100);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..63 {
            b.push(t(k as f64));
        }
        assert!(b.sample(64, &mut rng).is_none());
        b.push(t(63.0));
        let batch = b.sample(64, &mut rng).unwrap();
        let mut rs: Vec<f64> = batch.iter().map(|x| x.r).collect();
        rs.sort_by(f64::total_cmp);
        rs.dedup();
        assert_eq!(rs.len(), 64);
    }
}
