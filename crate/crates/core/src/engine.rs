//! Decoding loop: project, append, attend, score, evict.
//!
//! Every (layer, head) owns a [`HeadStream`] with its own cache, tracker and
//! policy state. Layers are chained through the residual stream, so a head's
//! input at layer `l + 1` depends on what earlier layers retained.

use alloc::vec::Vec;
use core::ops::Range;

use crate::attention::{attend, AttentionRow};
use crate::cache::KvCache;
use crate::error::{bail, Result};
use crate::model::{ModelWeights, ProjectedStep};
use crate::policy::{Eviction, ImportanceTracker, Policy, PolicyKind, ProtectedZones};
use crate::positions::RotaryTable;

/// Outcome of one step on one (layer, head).
#[derive(Debug, Clone, PartialEq)]
pub struct StreamStep {
    pub layer: usize,
    pub head: usize,
    /// Attention over the cache including the new token, before eviction.
    pub attention: AttentionRow,
    pub output: Vec<f64>,
    pub eviction: Option<Eviction>,
    /// Original positions held after this step's eviction.
    pub retained: Vec<usize>,
    /// Value vectors matching `attention`, when captured.
    pub values: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadStream {
    layer: usize,
    head: usize,
    cache: KvCache,
    tracker: ImportanceTracker,
    policy: Policy,
    rotary: RotaryTable,
}

impl HeadStream {
    pub fn new(layer: usize, head: usize, policy: Policy) -> Self {
        Self {
            layer,
            head,
            cache: KvCache::new(policy.cache_capacity()),
            tracker: ImportanceTracker::new(),
            policy,
            rotary: RotaryTable::default(),
        }
    }

    pub fn cache(&self) -> &KvCache {
        &self.cache
    }

    pub fn tracker(&self) -> &ImportanceTracker {
        &self.tracker
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn retained(&self) -> Vec<usize> {
        self.cache.positions()
    }

    /// Runs one decoding step for this head. The query is encoded at the
    /// new token's slot index, keys at theirs.
    pub fn step(&mut self, projected: ProjectedStep, position: usize) -> Result<StreamStep> {
        self.step_capturing(projected, position, false)
    }

    /// Like [`step`](Self::step), optionally returning the value vectors the
    /// attention row was computed over.
    pub fn step_capturing(&mut self, projected: ProjectedStep, position: usize, capture: bool) -> Result<StreamStep> {
        let ProjectedStep { q, k, v } = projected;
        if self.rotary.dim() != q.len() {
            self.rotary = RotaryTable::new(q.len());
        }
        self.cache.append(k, v, position)?;
        let keys: Vec<Vec<f64>> =
            self.cache.slots().iter().enumerate().map(|(i, s)| self.rotary.rotate(&s.key, i)).collect();
        let query = self.rotary.rotate(&q, self.cache.len() - 1);
        let values: Vec<&[f64]> = self.cache.slots().iter().map(|s| s.value.as_slice()).collect();
        let (row, output) = attend(&query, &keys, &values)?;
        let captured = capture.then(|| values.iter().map(|v| v.to_vec()).collect());
        let eviction = self.record_and_evict(&row)?;
        Ok(StreamStep {
            layer: self.layer,
            head: self.head,
            attention: row,
            output,
            eviction,
            retained: self.cache.positions(),
            values: captured,
        })
    }

    /// Drives the policy with an externally supplied attention row instead of
    /// computed attention. The cached key and value are empty. `row` must
    /// cover the cache after appending `position`.
    pub fn step_with_row(&mut self, position: usize, row: &[f64]) -> Result<Option<Eviction>> {
        self.cache.append(Vec::new(), Vec::new(), position)?;
        self.record_and_evict(&AttentionRow::from_weights(row.to_vec()))
    }

    fn record_and_evict(&mut self, row: &AttentionRow) -> Result<Option<Eviction>> {
        self.tracker.update(row)?;
        let eviction = self.policy.evict(&mut self.cache, &mut self.tracker, row)?;
        if self.cache.is_over_capacity() {
            bail!(Invariant, "cache still holds {} slots after eviction", self.cache.len());
        }
        if self.tracker.len() != self.cache.len() {
            bail!(Invariant, "tracker out of sync with cache");
        }
        Ok(eviction)
    }
}

/// All (layer, head) outcomes of one token, plus the final residual.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub position: usize,
    pub streams: Vec<StreamStep>,
    pub hidden: Vec<f64>,
}

/// Multi-layer, multi-head decoder over a shared set of weights.
#[derive(Debug, Clone)]
pub struct Engine<'w> {
    weights: &'w ModelWeights,
    streams: Vec<HeadStream>,
    next_position: usize,
}

impl<'w> Engine<'w> {
    pub fn new(weights: &'w ModelWeights, kind: PolicyKind, capacity: usize, zones: ProtectedZones) -> Result<Self> {
        let policy = Policy::new(kind, capacity, zones)?;
        let dims = weights.dims;
        let streams = (0..dims.layers)
            .flat_map(|l| (0..dims.heads).map(move |h| (l, h)))
            .map(|(l, h)| HeadStream::new(l, h, policy.clone()))
            .collect();
        Ok(Self { weights, streams, next_position: 0 })
    }

    pub fn weights(&self) -> &ModelWeights {
        self.weights
    }

    pub fn streams(&self) -> &[HeadStream] {
        &self.streams
    }

    pub fn stream(&self, layer: usize, head: usize) -> &HeadStream {
        &self.streams[layer * self.weights.dims.heads + head]
    }

    pub fn into_streams(self) -> Vec<HeadStream> {
        self.streams
    }

    pub fn position(&self) -> usize {
        self.next_position
    }

    /// Feeds one input vector through every layer.
    pub fn step(&mut self, x: &[f64]) -> Result<StepRecord> {
        self.step_inner(x, false)
    }

    /// [`step`](Self::step) that also records each head's attended values.
    pub fn step_capturing(&mut self, x: &[f64]) -> Result<StepRecord> {
        self.step_inner(x, true)
    }

    fn step_inner(&mut self, x: &[f64], capture: bool) -> Result<StepRecord> {
        let dims = self.weights.dims;
        if x.len() != dims.d_model {
            bail!(Dimension, "input of width {} for d_model {}", x.len(), dims.d_model);
        }
        let position = self.next_position;
        let mut hidden = x.to_vec();
        let mut records = Vec::with_capacity(self.streams.len());
        for (layer, lw) in self.weights.layers.iter().enumerate() {
            let mut concat = Vec::with_capacity(dims.heads * dims.d_head);
            for (head, hw) in lw.heads.iter().enumerate() {
                let projected = hw.project(&hidden)?;
                let step = self.streams[layer * dims.heads + head].step_capturing(projected, position, capture)?;
                concat.extend_from_slice(&step.output);
                records.push(step);
            }
            let update = lw.w_o.left_mul(&concat)?;
            for (h, u) in hidden.iter_mut().zip(update) {
                *h += u;
            }
        }
        self.next_position += 1;
        Ok(StepRecord { position, streams: records, hidden })
    }

    pub fn step_token(&mut self, token: usize) -> Result<StepRecord> {
        let x = self.weights.embed(token)?;
        self.step(&x)
    }
}

/// Runs the decoding loop over `inputs` and keeps every step record.
pub fn decode_with_policy(
    weights: &ModelWeights,
    inputs: &[Vec<f64>],
    kind: PolicyKind,
    capacity: usize,
    zones: ProtectedZones,
) -> Result<Vec<StepRecord>> {
    let mut engine = Engine::new(weights, kind, capacity, zones)?;
    inputs.iter().map(|x| engine.step(x)).collect()
}

/// Full-attention pass over a prompt.
#[derive(Debug, Clone)]
pub struct PrefillForward {
    /// One cache per (layer, head), layer-major, holding the whole prompt.
    pub caches: Vec<KvCache>,
    /// Per (layer, head): causal attention rows of the queries in the
    /// observation window, each zero-padded to the prompt length.
    pub window_rows: Vec<Vec<Vec<f64>>>,
}

/// Encodes a prompt with full causal attention, keeping the attention rows of
/// the queries inside `window`.
pub fn prefill_forward(weights: &ModelWeights, inputs: &[Vec<f64>], window: Range<usize>) -> Result<PrefillForward> {
    if window.end > inputs.len() || window.start >= window.end {
        bail!(Input, "observation window {window:?} invalid for prompt of {}", inputs.len());
    }
    let mut engine = Engine::new(weights, PolicyKind::Full, inputs.len(), ProtectedZones::NONE)?;
    let mut window_rows = alloc::vec![Vec::new(); weights.dims.streams()];
    for (t, x) in inputs.iter().enumerate() {
        let record = engine.step(x)?;
        if window.contains(&t) {
            for (rows, s) in window_rows.iter_mut().zip(&record.streams) {
                let mut row = s.attention.to_vec();
                row.resize(inputs.len(), 0.0);
                rows.push(row);
            }
        }
    }
    let caches = engine.into_streams().into_iter().map(|s| s.cache).collect();
    Ok(PrefillForward { caches, window_rows })
}
