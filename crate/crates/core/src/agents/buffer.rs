use std::collections::VecDeque;

use rand::Rng;

use super::{ActorKind, AgentState};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub kind: ActorKind,
    pub state: AgentState,
    /// Raw action, before power projection.
    pub action: Vec<f64>,
    /// The slot's shared reward.
    pub reward: f64,
    pub episode: usize,
    pub slot: usize,
}

/// Bounded FIFO store of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity: capacity.max(1), items: VecDeque::new() }
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

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `min(n, len)` distinct transitions, uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        rand::seq::index::sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedTree;
    use std::collections::HashSet;

    fn t(i: usize) -> Transition {
        Transition {
            kind: ActorKind::Hab,
            state: AgentState { rows: 1, antennas: 1, data: vec![0.0; 4] },
            action: vec![0.0; 2],
            reward: i as f64,
            episode: 0,
            slot: i,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(t(i));
        }
        let slots: Vec<_> = b.iter().map(|x| x.slot).collect();
        assert_eq!(slots, [2, 3, 4]);
    }

    #[test]
    fn sample_has_no_repeats() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..40 {
            b.push(t(i));
        }
        let mut rng = SeedTree::new(1).rng();
        for _ in 0..50 {
            let s = b.sample(32, &mut rng);
            let distinct: HashSet<_> = s.iter().map(|x| x.slot).collect();
            assert_eq!((s.len(), distinct.len()), (32, 32));
        }
        assert_eq!(b.sample(64, &mut rng).len(), 40);
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..10 {
            b.push(t(i));
        }
        let mut rng = SeedTree::new(2).rng();
        let mut counts = [0usize; 10];
        for _ in 0..20_000 {
            for x in b.sample(3, &mut rng) {
                counts[x.slot] += 1;
            }
        }
        // expected 6000 each, std ≈ 65
        assert!(counts.iter().all(|&c| (c as f64 - 6000.0).abs() < 400.0), "{counts:?}");
    }
}
