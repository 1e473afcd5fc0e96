//! Fixed-capacity ring of feature-space transitions, sampled uniformly with replacement.

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::qlearn::TdBatch;
use crate::rbf::FeatureVector;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub features: FeatureVector,
    pub action: usize,
    pub reward: f64,
    pub next_features: FeatureVector,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    write_cursor: usize,
    feature_len: Option<usize>,
}

pub const DEFAULT_CAPACITY: usize = 100_000;

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            storage: Vec::new(),
            write_cursor: 0,
            feature_len: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        check_len(
            "transition next_features",
            t.features.len(),
            t.next_features.len(),
        )?;
        match self.feature_len {
            Some(f) => check_len("transition features", f, t.features.len())?,
            None => self.feature_len = Some(t.features.len()),
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_cursor] = t;
        }
        self.write_cursor = (self.write_cursor + 1) % self.capacity;
        Ok(())
    }

    /// Slot contents, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.write_cursor
        };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    pub fn get(&self, slot: usize) -> Option<&Transition> {
        self.storage.get(slot)
    }

    /// `n` slot indices drawn i.i.d. uniformly from the filled region.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(Error::State(
                "cannot sample from an empty replay buffer".into(),
            ));
        }
        let filled = self.storage.len();
        Ok((0..n).map(|_| rng.random_range(0..filled)).collect())
    }

    pub fn sample_uniform<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<TdBatch> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let idx = self.sample_indices(batch_size, rng)?;
        let mut batch = TdBatch {
            features: Vec::with_capacity(batch_size),
            actions: Vec::with_capacity(batch_size),
            rewards: Vec::with_capacity(batch_size),
            next_features: Vec::with_capacity(batch_size),
            terminal: Vec::with_capacity(batch_size),
        };
        for i in idx {
            let t = &self.storage[i];
            batch.features.push(t.features.clone());
            batch.actions.push(t.action);
            batch.rewards.push(t.reward);
            batch.next_features.push(t.next_features.clone());
            batch.terminal.push(t.terminal);
        }
        Ok(batch)
    }
}
