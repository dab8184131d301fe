use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{bail, Result};

/// Softmax attention weights over the current cache slots.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRow(Vec<f64>);

impl AttentionRow {
    /// Wraps raw weights without renormalizing. Used for replaying recorded
    /// rows and for synthetic score streams.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for AttentionRow {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `a = softmax(q·Kᵀ / sqrt(d_head))`, `o = a · V`.
///
/// `q` and `keys` must already carry their position encoding.
pub fn attend<K: AsRef<[f64]>, V: AsRef<[f64]>>(
    q: &[f64],
    keys: &[K],
    values: &[V],
) -> Result<(AttentionRow, Vec<f64>)> {
    if keys.is_empty() {
        bail!(State, "attention over an empty cache");
    }
    if keys.len() != values.len() {
        bail!(Dimension, "{} keys but {} values", keys.len(), values.len());
    }
    let scale = 1.0 / libm::sqrt(q.len() as f64);
    let mut logits = Vec::with_capacity(keys.len());
    for k in keys {
        let k = k.as_ref();
        if k.len() != q.len() {
            bail!(Dimension, "key width {} against query width {}", k.len(), q.len());
        }
        logits.push(q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() * scale);
    }
    let weights = softmax(&logits);
    let width = values[0].as_ref().len();
    let mut out = alloc::vec![0.0; width];
    for (w, v) in weights.iter().zip(values) {
        let v = v.as_ref();
        if v.len() != width {
            bail!(Dimension, "ragged value vectors");
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    Ok((AttentionRow(weights), out))
}
