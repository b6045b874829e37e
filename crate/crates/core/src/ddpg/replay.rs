use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ACTION_DIM, STATE_DIM};
use crate::error::{Error, Result};

/// One observed transition; states are raw feature vectors, actions are
/// targets in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; STATE_DIM],
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_state: [f64; STATE_DIM],
}

/// Fixed-capacity ring of transitions; once full, each insert replaces the
/// oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity),
            head: 0,
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

    pub fn is_full(&self) -> bool {
        self.items.len() == self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `k` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if k > self.items.len() {
            return Err(Error::Invalid(format!(
                "batch of {k} exceeds buffer length {}",
                self.items.len()
            )));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), k)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

/// Per-feature min/max scaling into [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: [f64; STATE_DIM],
    pub max: [f64; STATE_DIM],
}

impl Normalizer {
    /// Fits on every state and next state held in `buffer`.
    pub fn fit(buffer: &ReplayBuffer) -> Result<Self> {
        if buffer.is_empty() {
            return Err(Error::Empty("replay buffer"));
        }
        let mut min = [f64::INFINITY; STATE_DIM];
        let mut max = [f64::NEG_INFINITY; STATE_DIM];
        for t in buffer.iter() {
            for s in [&t.state, &t.next_state] {
                for i in 0..STATE_DIM {
                    min[i] = min[i].min(s[i]);
                    max[i] = max[i].max(s[i]);
                }
            }
        }
        Ok(Self { min, max })
    }

    /// Constant features map to 0; values outside the fitted range clamp.
    pub fn apply(&self, s: &[f64; STATE_DIM]) -> [f64; STATE_DIM] {
        let mut out = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            let span = self.max[i] - self.min[i];
            out[i] = if span > 1e-12 {
                ((s[i] - self.min[i]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        out
    }
}
