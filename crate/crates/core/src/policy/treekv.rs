//! Tree-structured eviction.
//!
//! When the cache is one slot over capacity, the cursor `idx` names an
//! eviction scope of two adjacent slots `{idx, idx + 1}` (1-based). The slot
//! with the lower averaged score `S̄` is dropped; on a tie the left one goes.
//! The cursor then steps to the next slot, wrapping after the last, so the
//! scope sweeps from old to recent context. Repeated sweeps thin the old
//! context geometrically, leaving retained positions sparse on the left and
//! dense on the right.
//!
//! With protected zones the scope only sweeps the middle region: slot
//! numbering for the cursor starts after the `sink` slots and the cycle
//! length is `capacity - sink - recent`.

use crate::cache::KvCache;
use crate::error::{bail, Result};

use super::{ImportanceTracker, ProtectedZones};

/// How the slot inside the eviction scope is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeMode {
    /// Evict the scope member with the lower `S̄`, left on ties.
    ScoreDriven,
    /// Always evict the left member (ablation control).
    SelectLeft,
}

/// Cursor state of a tree-eviction stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeKvState {
    idx: usize,
    cycle_len: usize,
    capacity: usize,
    zones: ProtectedZones,
    mode: TreeMode,
}

impl TreeKvState {
    pub fn new(capacity: usize, zones: ProtectedZones, mode: TreeMode) -> Result<Self> {
        zones.check_capacity(capacity)?;
        Ok(Self { idx: 1, cycle_len: capacity - zones.sink - zones.recent, capacity, zones, mode })
    }

    /// Current 1-based cursor, in `1..=cycle_len`.
    pub fn idx(&self) -> usize {
        self.idx
    }

    /// Number of cursor values in one sweep; equals `capacity` without zones.
    pub fn cycle_len(&self) -> usize {
        self.cycle_len
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn mode(&self) -> TreeMode {
        self.mode
    }

    pub fn zones(&self) -> ProtectedZones {
        self.zones
    }

    /// `idx ← (idx mod c) + 1`: one unit step over `1..=c`, wrapping to 1.
    pub fn advance(&mut self) {
        self.idx = self.idx % self.cycle_len + 1;
    }

    /// 0-based cache slots covered by the current scope.
    pub fn scope(&self) -> (usize, usize) {
        let left = self.zones.sink + self.idx - 1;
        (left, left + 1)
    }
}

/// Advances the cursor by one cyclic step.
pub fn advance_idx(state: &mut TreeKvState) {
    state.advance();
}

/// Chooses between the two scope slots given their averaged scores.
pub fn choose_in_scope(mode: TreeMode, left_score: f64, right_score: f64) -> bool {
    // true => evict the right member
    mode == TreeMode::ScoreDriven && left_score > right_score
}

/// Evicts one slot of the current scope from `cache` and `tracker` and
/// returns its 0-based index. Does not move the cursor.
pub fn treekv_evict_step(
    cache: &mut KvCache,
    tracker: &mut ImportanceTracker,
    state: &TreeKvState,
) -> Result<usize> {
    if cache.len() != state.capacity + 1 {
        bail!(State, "tree eviction needs {} slots, cache holds {}", state.capacity + 1, cache.len());
    }
    if tracker.len() != cache.len() {
        bail!(Invariant, "tracker has {} entries for {} slots", tracker.len(), cache.len());
    }
    let (left, right) = state.scope();
    let victim = if state.mode == TreeMode::SelectLeft {
        left
    } else if choose_in_scope(state.mode, tracker.average(left)?, tracker.average(right)?) {
        right
    } else {
        left
    };
    cache.remove(victim)?;
    tracker.remove(victim)?;
    Ok(victim)
}
