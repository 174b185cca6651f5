//! Bounded recency tracking for SepBIT's user-write classification.
//!
//! Instead of a full `LBA -> last write time` map, SepBIT only needs to know
//! whether an LBA was written within the most recent `ℓ` user writes. A FIFO
//! of recently written LBAs plus a map from each LBA to the position of its
//! newest queue entry answers that in O(1).
//!
//! Positions are absolute insertion counters, so `inserted_total - position`
//! is exactly the number of user writes since the LBA was last written.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::Lba;

#[derive(Clone, Debug, Default)]
pub struct RecencyIndex {
    fifo: VecDeque<Lba>,
    positions: HashMap<Lba, u64>,
    inserted_total: u64,
    /// `None` while unbounded (before the first ℓ estimate).
    target_capacity: Option<usize>,
}

/// One observation of index size, taken whenever ℓ is re-estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorySample {
    pub at_time: u64,
    pub unique_lbas: usize,
    pub queue_len: usize,
}

impl RecencyIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(capacity: usize) -> Self {
        RecencyIndex { target_capacity: Some(capacity), ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn inserted_total(&self) -> u64 {
        self.inserted_total
    }

    pub fn target_capacity(&self) -> Option<usize> {
        self.target_capacity
    }

    pub fn unique_lba_count(&self) -> usize {
        self.positions.len()
    }

    pub fn position_of(&self, lba: Lba) -> Option<u64> {
        self.positions.get(&lba).copied()
    }

    /// Retargets the queue length to `ceil(threshold)` entries. A non-finite
    /// threshold makes the queue unbounded.
    pub fn retarget(&mut self, threshold: f64) {
        self.target_capacity = if threshold.is_finite() {
            Some(threshold.max(0.0).ceil() as usize)
        } else {
            None
        };
    }

    /// True iff `lba` was last written fewer than `threshold` inserts ago.
    ///
    /// Must be called before [`record_write`](Self::record_write) for the
    /// current write.
    pub fn is_recent(&self, lba: Lba, threshold: f64) -> bool {
        match self.positions.get(&lba) {
            Some(&pos) => ((self.inserted_total - pos) as f64) < threshold,
            None => false,
        }
    }

    /// Enqueues `lba`. At or above capacity one entry is dequeued per insert;
    /// while the queue is longer than its target two are dequeued.
    pub fn record_write(&mut self, lba: Lba) {
        let pos = self.inserted_total;
        self.fifo.push_back(lba);
        self.positions.insert(lba, pos);
        self.inserted_total += 1;

        if let Some(cap) = self.target_capacity {
            for _ in 0..2 {
                if self.fifo.len() <= cap {
                    break;
                }
                self.dequeue();
            }
        }
    }

    fn dequeue(&mut self) {
        let head_pos = self.inserted_total - self.fifo.len() as u64;
        if let Some(lba) = self.fifo.pop_front() {
            // Only drop the mapping if this was the LBA's newest entry.
            if self.positions.get(&lba) == Some(&head_pos) {
                self.positions.remove(&lba);
            }
        }
    }

    pub fn sample(&self, at_time: u64) -> MemorySample {
        MemorySample { at_time, unique_lbas: self.unique_lba_count(), queue_len: self.len() }
    }

    #[cfg(test)]
    fn check_invariants(&self) {
        let head = self.inserted_total - self.fifo.len() as u64;
        let mut newest: HashMap<Lba, u64> = HashMap::new();
        for (i, &lba) in self.fifo.iter().enumerate() {
            newest.insert(lba, head + i as u64);
        }
        assert_eq!(newest, self.positions);
    }
}
