//! Bounded FIFO transition store with uniform or priority-proportional
//! sampling.

use rand::Rng;

use crate::error::{Error, Result};

/// One environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleMode {
    Uniform,
    /// `P(i) = p_i^omega / sum_j p_j^omega`, importance weights
    /// `(N P(i))^-beta` normalized by the batch maximum.
    Prioritized {
        omega: f64,
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampled<'a> {
    pub index: usize,
    pub transition: &'a Transition,
    pub is_weight: f64,
}

#[derive(Debug, Clone)]
pub struct PriorityStore {
    capacity: usize,
    entries: Vec<Transition>,
    priorities: Vec<f64>,
    /// Slot the next push overwrites once full.
    head: usize,
    max_priority: f64,
    eps_p: f64,
}

impl PriorityStore {
    pub fn new(capacity: usize, eps_p: f64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        assert!(eps_p > 0.0, "priority floor must be positive");
        Self {
            capacity,
            entries: Vec::with_capacity(capacity.min(1 << 16)),
            priorities: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            max_priority: 1.0,
            eps_p,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.entries.get(index)
    }

    pub fn priority(&self, index: usize) -> Option<f64> {
        self.priorities.get(index).copied()
    }

    pub fn priorities(&self) -> &[f64] {
        &self.priorities
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.entries.split_at(self.head.min(self.entries.len()));
        older.iter().chain(newer)
    }

    fn recompute_max(&mut self) {
        self.max_priority = self
            .priorities
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !self.max_priority.is_finite() {
            self.max_priority = 1.0;
        }
    }

    /// Inserts with the current maximum priority (1.0 when empty), evicting
    /// the oldest entry at capacity.
    pub fn push(&mut self, t: Transition) {
        let p = if self.is_empty() {
            1.0
        } else {
            self.max_priority
        };
        if self.entries.len() < self.capacity {
            self.entries.push(t);
            self.priorities.push(p);
            self.head = self.entries.len() % self.capacity;
        } else {
            let evicted = self.priorities[self.head];
            self.entries[self.head] = t;
            self.priorities[self.head] = p;
            self.head = (self.head + 1) % self.capacity;
            if evicted >= self.max_priority {
                self.recompute_max();
            }
        }
    }

    /// Sampling distribution over stored entries.
    pub fn probabilities(&self, omega: f64) -> Vec<f64> {
        let scaled: Vec<f64> = self.priorities.iter().map(|p| p.powf(omega)).collect();
        let total: f64 = scaled.iter().sum();
        scaled.into_iter().map(|p| p / total).collect()
    }

    /// Draws `k` entries with replacement.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        k: usize,
        mode: SampleMode,
        rng: &mut R,
    ) -> Result<Vec<Sampled<'_>>> {
        if self.is_empty() {
            return Err(Error::EmptyReplay);
        }
        let n = self.len();
        match mode {
            SampleMode::Uniform => Ok((0..k)
                .map(|_| {
                    let index = rng.random_range(0..n);
                    Sampled {
                        index,
                        transition: &self.entries[index],
                        is_weight: 1.0,
                    }
                })
                .collect()),
            SampleMode::Prioritized { omega, beta } => {
                let mut cumulative = Vec::with_capacity(n);
                let mut total = 0.0;
                for p in &self.priorities {
                    total += p.powf(omega);
                    cumulative.push(total);
                }
                let picks: Vec<(usize, f64)> = (0..k)
                    .map(|_| {
                        let u = rng.random::<f64>() * total;
                        let index = cumulative.partition_point(|&c| c <= u).min(n - 1);
                        let prob = self.priorities[index].powf(omega) / total;
                        (index, (n as f64 * prob).powf(-beta))
                    })
                    .collect();
                let max_w = picks.iter().map(|p| p.1).fold(0.0, f64::max);
                Ok(picks
                    .into_iter()
                    .map(|(index, w)| Sampled {
                        index,
                        transition: &self.entries[index],
                        is_weight: w / max_w,
                    })
                    .collect())
            }
        }
    }

    /// Sets `p_i = |delta_i| + eps_p`.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<()> {
        if indices.len() != td_errors.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                got: td_errors.len(),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::OutOfRange {
                index: bad,
                len: self.len(),
            });
        }
        for (&i, d) in indices.iter().zip(td_errors) {
            if !d.is_finite() {
                return Err(Error::NonFinite("td error"));
            }
            self.priorities[i] = d.abs() + self.eps_p;
        }
        self.recompute_max();
        Ok(())
    }
}
