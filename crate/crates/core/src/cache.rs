use alloc::vec::Vec;

use crate::error::{bail, Result};

/// One cached token for a single (layer, head).
///
/// Keys are stored raw; the position encoding is applied at attention time
/// using the slot index, so evictions never require re-encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheSlot {
    pub key: Vec<f64>,
    pub value: Vec<f64>,
    /// 0-based global token index.
    pub position: usize,
}

/// Ordered KV cache of one (layer, head) with a retention capacity `c`.
///
/// The cache may briefly hold `c + 1` slots between an append and the
/// following eviction. Slot `i` of the cache corresponds to entry `i` of the
/// [`ImportanceTracker`](crate::policy::ImportanceTracker) kept alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct KvCache {
    capacity: usize,
    slots: Vec<CacheSlot>,
}

impl KvCache {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, slots: Vec::new() }
    }

    /// A cache that never needs eviction.
    pub fn unbounded() -> Self {
        Self::new(usize::MAX - 1)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_over_capacity(&self) -> bool {
        self.slots.len() > self.capacity
    }

    pub fn slots(&self) -> &[CacheSlot] {
        &self.slots
    }

    pub fn positions(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.position).collect()
    }

    /// Appends a token. Its position must exceed every cached position, and
    /// the cache must not already be one over capacity.
    pub fn append(&mut self, key: Vec<f64>, value: Vec<f64>, position: usize) -> Result<()> {
        if let Some(last) = self.slots.last() {
            if position <= last.position {
                bail!(Ordering, "position {position} does not follow cached position {}", last.position);
            }
            if key.len() != last.key.len() || value.len() != last.value.len() {
                bail!(Dimension, "slot width changed from {} to {}", last.key.len(), key.len());
            }
        }
        if self.slots.len() > self.capacity {
            bail!(State, "cache holds {} slots, evict before appending", self.slots.len());
        }
        self.slots.push(CacheSlot { key, value, position });
        Ok(())
    }

    /// Removes the slot at 0-based `index`, keeping survivors in order.
    pub fn remove(&mut self, index: usize) -> Result<CacheSlot> {
        if index >= self.slots.len() {
            bail!(State, "slot {index} out of range for {} slots", self.slots.len());
        }
        Ok(self.slots.remove(index))
    }

    /// Keeps only slots for which `keep` returns true.
    pub fn retain(&mut self, mut keep: impl FnMut(&CacheSlot) -> bool) {
        self.slots.retain(|s| keep(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn push(c: &mut KvCache, pos: usize) -> Result<()> {
        c.append(vec![0.0], vec![0.0], pos)
    }

    #[test]
    fn append_increments_len() {
        let mut c = KvCache::new(4);
        push(&mut c, 0).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn positions_follow_append_order() {
        let mut c = KvCache::new(4);
        for p in 0..3 {
            push(&mut c, p).unwrap();
        }
        assert_eq!(c.positions(), vec![0, 1, 2]);
    }

    #[test]
    fn append_after_eviction_keeps_order() {
        let mut c = KvCache::new(4);
        for p in 0..4 {
            push(&mut c, p).unwrap();
        }
        c.remove(2).unwrap();
        push(&mut c, 4).unwrap();
        assert_eq!(c.positions(), vec![0, 1, 3, 4]);
    }

    #[test]
    fn non_monotone_append_rejected() {
        let mut c = KvCache::new(4);
        push(&mut c, 3).unwrap();
        assert!(matches!(push(&mut c, 3), Err(crate::Error::Ordering(_))));
        assert!(matches!(push(&mut c, 1), Err(crate::Error::Ordering(_))));
    }

    #[test]
    fn at_most_one_over_capacity() {
        let mut c = KvCache::new(2);
        for p in 0..3 {
            push(&mut c, p).unwrap();
        }
        assert!(c.is_over_capacity());
        assert!(matches!(push(&mut c, 3), Err(crate::Error::State(_))));
    }
}
