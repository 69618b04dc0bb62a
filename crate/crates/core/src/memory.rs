//! Experience replay and the danger/safe state stores that feed the fear
//! model.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;

use crate::envs::Action;

pub const DEFAULT_REPLAY_CAPACITY: usize = 100_000;
pub const DEFAULT_STATE_STORE_CAPACITY: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Action,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub terminal: bool,
    pub catastrophe: bool,
}

/// Bounded FIFO store: once full, each insert evicts the oldest entry.
#[derive(Debug, Clone)]
pub struct RingStore<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> RingStore<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "store capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
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

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `k` uniform draws with replacement; `None` when the store is empty.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Option<Vec<&T>> {
        if self.items.is_empty() {
            return None;
        }
        let n = self.items.len();
        Some((0..k).map(|_| &self.items[rng.random_range(0..n)]).collect())
    }
}

pub type ReplayBuffer = RingStore<Transition>;

/// Split an episode's visited states into `(danger, safe)`.
///
/// After a catastrophe the last `k_r` states are danger and the rest safe;
/// shorter episodes are entirely danger. Episodes that end any other way are
/// entirely safe.
pub fn label_episode<T>(states: &[T], ended_in_catastrophe: bool, k_r: usize) -> (&[T], &[T]) {
    if !ended_in_catastrophe {
        return (&states[..0], states);
    }
    let cut = states.len().saturating_sub(k_r);
    let (safe, danger) = states.split_at(cut);
    (danger, safe)
}

#[derive(Debug, Clone)]
pub struct FearBuffers {
    pub danger: RingStore<Vec<f64>>,
    pub safe: RingStore<Vec<f64>>,
}

impl Default for FearBuffers {
    fn default() -> Self {
        Self::new(DEFAULT_STATE_STORE_CAPACITY)
    }
}

impl FearBuffers {
    pub fn new(capacity: usize) -> Self {
        Self {
            danger: RingStore::new(capacity),
            safe: RingStore::new(capacity),
        }
    }

    /// Label a finished episode and copy its states into the stores.
    pub fn record_episode(&mut self, states: &[Vec<f64>], catastrophe: bool, k_r: usize) {
        let (danger, safe) = label_episode(states, catastrophe, k_r);
        for s in danger {
            self.danger.push(s.clone());
        }
        for s in safe {
            self.safe.push(s.clone());
        }
    }

    /// Half-danger, half-safe labeled batch: `ceil(k/2)` danger states with
    /// label 1 then `floor(k/2)` safe states with label 0.
    ///
    /// Returns `None` (training deferred) while the danger store is empty. An
    /// empty safe store yields an all-danger batch.
    pub fn sample_batch<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Option<Vec<(&[f64], f64)>> {
        let n_danger = k.div_ceil(2);
        let mut batch: Vec<(&[f64], f64)> = self
            .danger
            .sample(n_danger, rng)?
            .into_iter()
            .map(|s| (s.as_slice(), 1.0))
            .collect();
        let n_safe = k - n_danger;
        match self.safe.sample(n_safe, rng) {
            Some(safe) => batch.extend(safe.into_iter().map(|s| (s.as_slice(), 0.0))),
            None => {
                let extra = self.danger.sample(n_safe, rng)?;
                batch.extend(extra.into_iter().map(|s| (s.as_slice(), 1.0)));
            }
        }
        Some(batch)
    }

    /// CSV audit of both stores: `store, s0, s1, ...`.
    pub fn write_audit<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let dim = self
            .danger
            .iter()
            .chain(self.safe.iter())
            .map(Vec::len)
            .next()
            .unwrap_or(0);
        let mut header = vec!["store".to_string()];
        header.extend((0..dim).map(|i| format!("s{i}")));
        w.write_record(&header)?;
        for (name, store) in [("danger", &self.danger), ("safe", &self.safe)] {
            for s in store.iter() {
                let mut row = vec![name.to_string()];
                row.extend(s.iter().map(|x| x.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
