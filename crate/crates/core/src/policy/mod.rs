//! Eviction policies behind one contract: given an over-capacity cache, its
//! tracker and the latest attention row, remove zero or one slot.

mod baselines;
mod tracker;
mod treekv;

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use crate::cache::KvCache;
use crate::error::{bail, Error, Result};

pub use baselines::{evictable_range, h2o_evict, streaming_llm_evict, tova_evict};
pub use tracker::{average_scores, update_scores, ImportanceTracker};
pub use treekv::{advance_idx, choose_in_scope, treekv_evict_step, TreeKvState, TreeMode};

/// Initial and most recent slots that no policy may evict.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProtectedZones {
    pub sink: usize,
    pub recent: usize,
}

impl ProtectedZones {
    pub const NONE: Self = Self { sink: 0, recent: 0 };

    pub fn new(sink: usize, recent: usize) -> Self {
        Self { sink, recent }
    }

    /// Tree eviction needs a two-slot scope in the middle region, so the
    /// zones must leave at least one slot unprotected in a full cache.
    pub fn check_capacity(&self, capacity: usize) -> Result<()> {
        match self.sink.checked_add(self.recent) {
            Some(total) if total < capacity => Ok(()),
            _ => bail!(
                Config,
                "sink={} + recent={} must be below cache size {capacity}",
                self.sink,
                self.recent
            ),
        }
    }

    /// Single-slot policies only need one unprotected slot in the
    /// over-capacity cache of `capacity + 1` slots.
    pub fn check_capacity_loose(&self, capacity: usize) -> Result<()> {
        match self.sink.checked_add(self.recent) {
            Some(total) if total <= capacity => Ok(()),
            _ => bail!(
                Config,
                "sink={} + recent={} exceeds cache size {capacity}",
                self.sink,
                self.recent
            ),
        }
    }
}

impl fmt::Display for ProtectedZones {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sink={},recent={}", self.sink, self.recent)
    }
}

/// Parses `sink=4,recent=508`. Either key may be omitted (defaults to 0);
/// `none` or an empty string means no zones.
impl FromStr for ProtectedZones {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut zones = Self::NONE;
        if s.is_empty() || s == "none" {
            return Ok(zones);
        }
        for part in s.split(',') {
            let Some((key, value)) = part.split_once('=') else {
                bail!(Config, "zone term {part:?} is not key=value");
            };
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(alloc::format!("zone value {value:?} is not a count")))?;
            match key.trim() {
                "sink" => zones.sink = value,
                "recent" => zones.recent = value,
                other => bail!(Config, "unknown zone key {other:?}"),
            }
        }
        Ok(zones)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Never evict.
    Full,
    /// Sinks plus sliding window.
    Streaming,
    /// Cumulative-attention heavy hitters.
    H2o,
    /// Latest-row attention.
    Tova,
    /// Tree eviction driven by averaged scores.
    TreeKv,
    /// Tree eviction that always drops the left scope member.
    TreeKvLeft,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Full,
        PolicyKind::Streaming,
        PolicyKind::H2o,
        PolicyKind::Tova,
        PolicyKind::TreeKv,
        PolicyKind::TreeKvLeft,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Full => "full",
            PolicyKind::Streaming => "streaming",
            PolicyKind::H2o => "h2o",
            PolicyKind::Tova => "tova",
            PolicyKind::TreeKv => "treekv",
            PolicyKind::TreeKvLeft => "treekv-left",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(alloc::format!("unknown policy {s:?}")))
    }
}

/// One eviction: which slot went, the token it held, and the tree cursor
/// value that selected it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eviction {
    /// 0-based slot index before removal.
    pub slot: usize,
    /// Original position of the evicted token.
    pub position: usize,
    /// 1-based tree cursor, for tree policies.
    pub cursor: Option<usize>,
}

/// A configured policy instance for one (layer, head) stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    kind: PolicyKind,
    capacity: usize,
    zones: ProtectedZones,
    tree: Option<TreeKvState>,
}

impl Policy {
    pub fn new(kind: PolicyKind, capacity: usize, zones: ProtectedZones) -> Result<Self> {
        let tree = match kind {
            PolicyKind::Full => None,
            PolicyKind::TreeKv | PolicyKind::TreeKvLeft => {
                let mode = if kind == PolicyKind::TreeKv { TreeMode::ScoreDriven } else { TreeMode::SelectLeft };
                Some(TreeKvState::new(capacity, zones, mode)?)
            }
            _ => {
                zones.check_capacity_loose(capacity)?;
                None
            }
        };
        if kind != PolicyKind::Full && capacity < 2 {
            bail!(Config, "cache size must be at least 2, got {capacity}");
        }
        Ok(Self { kind, capacity, zones, tree })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn zones(&self) -> ProtectedZones {
        self.zones
    }

    pub fn tree_state(&self) -> Option<&TreeKvState> {
        self.tree.as_ref()
    }

    /// Capacity to give the cache this policy manages.
    pub fn cache_capacity(&self) -> usize {
        match self.kind {
            PolicyKind::Full => KvCache::unbounded().capacity(),
            _ => self.capacity,
        }
    }

    /// Evicts one slot if the cache is over capacity. `last_row` is the row
    /// produced by the step that just ran, covering every current slot.
    pub fn evict(
        &mut self,
        cache: &mut KvCache,
        tracker: &mut ImportanceTracker,
        last_row: &[f64],
    ) -> Result<Option<Eviction>> {
        if !cache.is_over_capacity() || self.kind == PolicyKind::Full {
            return Ok(None);
        }
        let positions = cache.positions();
        let (slot, cursor) = match self.kind {
            PolicyKind::Full => unreachable!(),
            PolicyKind::Streaming => (streaming_llm_evict(cache, tracker, self.zones)?, None),
            PolicyKind::H2o => (h2o_evict(cache, tracker, self.zones)?, None),
            PolicyKind::Tova => (tova_evict(cache, tracker, last_row, self.zones)?, None),
            PolicyKind::TreeKv | PolicyKind::TreeKvLeft => {
                let state = self
                    .tree
                    .as_mut()
                    .ok_or_else(|| Error::Invariant("tree policy without cursor".to_string()))?;
                let cursor = state.idx();
                let slot = treekv_evict_step(cache, tracker, state)?;
                state.advance();
                (slot, Some(cursor))
            }
        };
        Ok(Some(Eviction { slot, position: positions[slot], cursor }))
    }
}

/// Parses a policy name, for config files and flags.
pub fn parse_policy(name: &str) -> Result<PolicyKind> {
    name.parse()
}

/// Renders a policy and zone pair, e.g. `treekv[sink=4,recent=508]`.
pub fn describe(kind: PolicyKind, zones: ProtectedZones) -> String {
    alloc::format!("{kind}[{zones}]")
}
