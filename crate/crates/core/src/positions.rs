//! Rotary position encoding keyed by cache slot index.
//!
//! After evictions the surviving slots are renumbered `0..len` and the
//! incoming token takes position `len`, so the encoding never sees gaps.

use alloc::vec::Vec;

use crate::cache::KvCache;

pub const ROPE_BASE: f64 = 10_000.0;

/// Rotates consecutive pairs `(x[2i], x[2i+1])` by `position · base^(-2i/d)`.
/// An odd trailing dimension is left untouched.
pub fn rotate(x: &[f64], position: usize) -> Vec<f64> {
    let mut out = x.to_vec();
    if position == 0 {
        return out;
    }
    let d = x.len() as f64;
    let p = position as f64;
    for (i, pair) in out.chunks_exact_mut(2).enumerate() {
        let theta = p * libm::pow(ROPE_BASE, -2.0 * i as f64 / d);
        let (sin, cos) = libm::sincos(theta);
        let (a, b) = (pair[0], pair[1]);
        pair[0] = a * cos - b * sin;
        pair[1] = a * sin + b * cos;
    }
    out
}

/// Precomputed `(cos, sin)` pairs for positions `0..len`, filled on demand.
/// Entries use the same formula as [`rotate`], so results are bit-identical.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RotaryTable {
    dim: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl RotaryTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, cos: Vec::new(), sin: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn pairs(&self) -> usize {
        self.dim / 2
    }

    fn ensure(&mut self, positions: usize) {
        let pairs = self.pairs();
        if pairs == 0 {
            return;
        }
        let have = self.cos.len() / pairs;
        let d = self.dim as f64;
        for p in have..positions {
            for i in 0..pairs {
                let theta = p as f64 * libm::pow(ROPE_BASE, -2.0 * i as f64 / d);
                let (sin, cos) = libm::sincos(theta);
                self.cos.push(cos);
                self.sin.push(sin);
            }
        }
    }

    pub fn rotate(&mut self, x: &[f64], position: usize) -> Vec<f64> {
        let mut out = x.to_vec();
        if position == 0 || x.len() != self.dim {
            return if position == 0 { out } else { rotate(x, position) };
        }
        self.ensure(position + 1);
        let pairs = self.pairs();
        let base = position * pairs;
        for (i, pair) in out.chunks_exact_mut(2).enumerate() {
            let (cos, sin) = (self.cos[base + i], self.sin[base + i]);
            let (a, b) = (pair[0], pair[1]);
            pair[0] = a * cos - b * sin;
            pair[1] = a * sin + b * cos;
        }
        out
    }
}

/// Keys and query after position encoding, with the positions used.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedView {
    pub keys: Vec<Vec<f64>>,
    pub query: Vec<f64>,
    pub key_positions: Vec<usize>,
    pub query_position: usize,
}

/// Encodes every cached key at its slot index and the incoming query at
/// `cache.len()`. Stored keys are not modified.
pub fn apply_positions(cache: &KvCache, query: &[f64]) -> EncodedView {
    let key_positions: Vec<usize> = (0..cache.len()).collect();
    let keys = cache.slots().iter().zip(&key_positions).map(|(s, p)| rotate(&s.key, *p)).collect();
    let query_position = cache.len();
    EncodedView { keys, query: rotate(query, query_position), key_positions, query_position }
}

/// Keys of a cache that already contains the query's own token, encoded at
/// slot indices. The query belongs at `cache.len() - 1`.
pub fn encoded_keys(cache: &KvCache) -> Vec<Vec<f64>> {
    cache.slots().iter().enumerate().map(|(i, s)| rotate(&s.key, i)).collect()
}
