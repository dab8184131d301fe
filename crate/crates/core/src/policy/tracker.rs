use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Per-slot attention statistics: cumulative mass `S` and residency count `C`.
///
/// Entry `i` belongs to cache slot `i`; entries are removed together with
/// their slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImportanceTracker {
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl ImportanceTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a tracker from explicit `S` and `C`. Every count must be at
    /// least one.
    pub fn from_parts(sums: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if sums.len() != counts.len() {
            bail!(Dimension, "{} sums but {} counts", sums.len(), counts.len());
        }
        if counts.contains(&0) {
            bail!(Invariant, "residency count of zero");
        }
        Ok(Self { sums, counts })
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// One decoding step: a zero entry is opened for the newly appended slot,
    /// then `S += row` and `C += 1` elementwise. `row` covers the cache after
    /// the append, so it is one longer than the tracker.
    pub fn update(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.sums.len() + 1 {
            bail!(
                Dimension,
                "attention row of length {} for {} tracked slots plus the new one",
                row.len(),
                self.sums.len()
            );
        }
        self.sums.push(0.0);
        self.counts.push(0);
        for ((s, c), a) in self.sums.iter_mut().zip(self.counts.iter_mut()).zip(row) {
            *s += a;
            *c += 1;
        }
        Ok(())
    }

    /// `S̄ = S / C`.
    pub fn averages(&self) -> Result<Vec<f64>> {
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(s, c)| {
                if *c == 0 {
                    bail!(Invariant, "residency count of zero");
                }
                Ok(s / *c as f64)
            })
            .collect()
    }

    /// `S̄` of a single slot.
    pub fn average(&self, slot: usize) -> Result<f64> {
        match (self.sums.get(slot), self.counts.get(slot)) {
            (Some(_), Some(0)) => bail!(Invariant, "residency count of zero"),
            (Some(s), Some(c)) => Ok(s / *c as f64),
            _ => bail!(State, "slot {slot} not tracked"),
        }
    }

    pub fn remove(&mut self, slot: usize) -> Result<()> {
        if slot >= self.sums.len() {
            bail!(State, "slot {slot} out of range for {} tracked slots", self.sums.len());
        }
        self.sums.remove(slot);
        self.counts.remove(slot);
        Ok(())
    }
}

/// Applies one step's attention row to the tracker.
pub fn update_scores(tracker: &mut ImportanceTracker, row: &[f64]) -> Result<()> {
    tracker.update(row)
}

/// Elementwise `S / C`.
pub fn average_scores(tracker: &ImportanceTracker) -> Result<Vec<f64>> {
    tracker.averages()
}
