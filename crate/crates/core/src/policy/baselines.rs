//! Baseline eviction rules: attention sinks plus a sliding window, cumulative
//! heavy hitters, and last-row attention. Each removes exactly one slot from
//! an over-capacity cache and its tracker, returning the 0-based index.

use core::ops::Range;

use crate::cache::KvCache;
use crate::error::{bail, Result};

use super::{ImportanceTracker, ProtectedZones};

fn check_over_capacity(cache: &KvCache, tracker: &ImportanceTracker) -> Result<()> {
    if !cache.is_over_capacity() {
        bail!(State, "cache of {} slots is not over capacity {}", cache.len(), cache.capacity());
    }
    if tracker.len() != cache.len() {
        bail!(Invariant, "tracker has {} entries for {} slots", tracker.len(), cache.len());
    }
    Ok(())
}

/// Slots outside both protected zones.
pub fn evictable_range(len: usize, zones: ProtectedZones) -> Result<Range<usize>> {
    let end = len.saturating_sub(zones.recent);
    if zones.sink >= end {
        bail!(Config, "no evictable slots among {len} with sink={} recent={}", zones.sink, zones.recent);
    }
    Ok(zones.sink..end)
}

/// Leftmost index of the minimum over `range`.
fn leftmost_argmin(values: &[f64], range: Range<usize>) -> usize {
    let mut best = range.start;
    for i in range {
        if values[i] < values[best] {
            best = i;
        }
    }
    best
}

/// Drops the oldest slot after the sinks.
pub fn streaming_llm_evict(
    cache: &mut KvCache,
    tracker: &mut ImportanceTracker,
    zones: ProtectedZones,
) -> Result<usize> {
    zones.check_capacity_loose(cache.capacity())?;
    check_over_capacity(cache, tracker)?;
    let victim = zones.sink;
    cache.remove(victim)?;
    tracker.remove(victim)?;
    Ok(victim)
}

/// Drops the evictable slot with the smallest cumulative score `S`.
pub fn h2o_evict(cache: &mut KvCache, tracker: &mut ImportanceTracker, zones: ProtectedZones) -> Result<usize> {
    check_over_capacity(cache, tracker)?;
    let range = evictable_range(cache.len(), zones)?;
    let victim = leftmost_argmin(tracker.sums(), range);
    cache.remove(victim)?;
    tracker.remove(victim)?;
    Ok(victim)
}

/// Drops the evictable slot with the smallest weight in the latest row.
pub fn tova_evict(
    cache: &mut KvCache,
    tracker: &mut ImportanceTracker,
    last_row: &[f64],
    zones: ProtectedZones,
) -> Result<usize> {
    if last_row.len() != cache.len() {
        bail!(Dimension, "last attention row has {} entries for {} slots", last_row.len(), cache.len());
    }
    check_over_capacity(cache, tracker)?;
    let range = evictable_range(cache.len(), zones)?;
    let victim = leftmost_argmin(last_row, range);
    cache.remove(victim)?;
    tracker.remove(victim)?;
    Ok(victim)
}
