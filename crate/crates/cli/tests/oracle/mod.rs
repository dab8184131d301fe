//! Brute-force reference implementations for the acceptance and property
//! tests. Nothing here calls into the code under test except to read raw
//! weight matrices.

#![allow(dead_code)]

use treekv_core::ModelWeights;

/// Result of a naive slot-by-slot tree simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSimResult {
    /// Surviving token numbers, 1-based, in cache order.
    pub retained: Vec<usize>,
    /// Cursor (1-based scope start) of every eviction, in order.
    pub cursors: Vec<usize>,
}

/// Where the simulator gets its per-step scores from.
pub enum TreeScores<'a> {
    /// Always evict the left slot of the scope.
    SelectLeft,
    /// `rows[t]` is the attention row at token `t + 1`, one entry per slot
    /// after that token was appended.
    Rows(&'a [Vec<f64>]),
}

struct Entry {
    token: usize,
    sum: f64,
    count: f64,
}

/// Decodes tokens `1..=steps` into a cache of `capacity` entries, keeping
/// everything in a plain list.
pub fn oracle_tree_sim(capacity: usize, steps: usize, scores: TreeScores<'_>) -> TreeSimResult {
    let mut list: Vec<Entry> = Vec::new();
    let mut cursors = Vec::new();
    let mut idx = 1usize;
    for t in 1..=steps {
        list.push(Entry { token: t, sum: 0.0, count: 0.0 });
        if let TreeScores::Rows(rows) = &scores {
            let row = &rows[t - 1];
            assert_eq!(row.len(), list.len(), "score row {t} has the wrong length");
            for (e, a) in list.iter_mut().zip(row) {
                e.sum += a;
                e.count += 1.0;
            }
        }
        if list.len() <= capacity {
            continue;
        }
        let left = idx - 1;
        let right = idx;
        let victim = match &scores {
            TreeScores::SelectLeft => left,
            TreeScores::Rows(_) => {
                let l = list[left].sum / list[left].count;
                let r = list[right].sum / list[right].count;
                if l > r {
                    right
                } else {
                    left
                }
            }
        };
        cursors.push(idx);
        list.remove(victim);
        idx = idx % capacity + 1;
    }
    TreeSimResult { retained: list.iter().map(|e| e.token).collect(), cursors }
}

/// Multi-level Haar analysis written as explicit filter sums:
/// `A[k] = Σ_n h[n]·x[2k+n]`, `D[k] = Σ_n g[n]·x[2k+n]` with
/// `h = [1/√2, 1/√2]` and `g = [1/√2, -1/√2]`, zero-extending odd inputs.
/// Returns `[A_L, D_L, ..., D_1]`.
pub fn oracle_dwt(signal: &[f64], levels: usize) -> Vec<Vec<f64>> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let h = [r, r];
    let g = [r, -r];
    let mut approx = signal.to_vec();
    let mut details = Vec::new();
    for _ in 0..levels {
        let half = approx.len().div_ceil(2);
        let mut a = vec![0.0; half];
        let mut d = vec![0.0; half];
        for k in 0..half {
            for n in 0..2 {
                let x = approx.get(2 * k + n).copied().unwrap_or(0.0);
                a[k] += h[n] * x;
                d[k] += g[n] * x;
            }
        }
        details.push(d);
        approx = a;
    }
    let mut out = vec![approx];
    out.extend(details.into_iter().rev());
    out
}

/// Per step, per (layer, head) attention outputs of the toy model with an
/// unbounded cache. Every step recomputes every layer for the whole prefix
/// from the raw weights.
pub fn oracle_full_attention(weights: &ModelWeights, inputs: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
    (0..inputs.len()).map(|t| dense_prefix(weights, &inputs[..=t])).collect()
}

fn dense_prefix(weights: &ModelWeights, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dims = weights.dims;
    let n = inputs.len();
    let mut hidden: Vec<Vec<f64>> = inputs.to_vec();
    let mut last = Vec::new();
    for layer in &weights.layers {
        let mut concat = vec![Vec::new(); n];
        for head in &layer.heads {
            let q: Vec<Vec<f64>> =
                hidden.iter().enumerate().map(|(j, x)| rope(&matvec(head.w_q.data(), dims.d_head, x), j)).collect();
            let k: Vec<Vec<f64>> =
                hidden.iter().enumerate().map(|(j, x)| rope(&matvec(head.w_k.data(), dims.d_head, x), j)).collect();
            let v: Vec<Vec<f64>> = hidden.iter().map(|x| matvec(head.w_v.data(), dims.d_head, x)).collect();
            for i in 0..n {
                let logits: Vec<f64> =
                    (0..=i).map(|j| dot(&q[i], &k[j]) / (dims.d_head as f64).sqrt()).collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                let mut o = vec![0.0; dims.d_head];
                for (j, e) in exps.iter().enumerate() {
                    for c in 0..dims.d_head {
                        o[c] += e / z * v[j][c];
                    }
                }
                if i == n - 1 {
                    last.push(o.clone());
                }
                concat[i].extend(o);
            }
        }
        for (x, c) in hidden.iter_mut().zip(&concat) {
            let update = matvec(layer.w_o.data(), dims.d_model, c);
            for (a, b) in x.iter_mut().zip(update) {
                *a += b;
            }
        }
    }
    last
}

/// `x · M` for row-major `M` with `cols` columns.
fn matvec(m: &[f32], cols: usize, x: &[f64]) -> Vec<f64> {
    (0..cols).map(|c| x.iter().enumerate().map(|(r, xi)| xi * m[r * cols + c] as f64).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pairwise rotation of `(x[2i], x[2i+1])` by `pos · 10000^(-2i/d)`.
pub fn rope(x: &[f64], pos: usize) -> Vec<f64> {
    let d = x.len() as f64;
    let mut out = x.to_vec();
    for i in 0..x.len() / 2 {
        let theta = pos as f64 / 10000f64.powf(2.0 * i as f64 / d);
        let (s, c) = theta.sin_cos();
        out[2 * i] = x[2 * i] * c - x[2 * i + 1] * s;
        out[2 * i + 1] = x[2 * i] * s + x[2 * i + 1] * c;
    }
    out
}

/// Relative error `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

/// Survivors of a single-slot policy replayed on a plain list of
/// `(position, cumulative score)` pairs.
pub struct Brute {
    pub capacity: usize,
    pub sink: usize,
    pub recent: usize,
    pub entries: Vec<(usize, f64)>,
}

/// Which single-slot rule [`Brute::step`] applies.
#[derive(Clone, Copy, Debug)]
pub enum BruteRule {
    Streaming,
    H2o,
    Tova,
}

impl Brute {
    pub fn new(capacity: usize, sink: usize, recent: usize) -> Self {
        Self { capacity, sink, recent, entries: Vec::new() }
    }

    /// Appends `position`, accumulates `row`, and evicts if needed. Returns
    /// the evicted position.
    pub fn step(&mut self, rule: BruteRule, position: usize, row: &[f64]) -> Option<usize> {
        self.entries.push((position, 0.0));
        for (e, a) in self.entries.iter_mut().zip(row) {
            e.1 += a;
        }
        if self.entries.len() <= self.capacity {
            return None;
        }
        let lo = self.sink;
        let hi = self.entries.len() - self.recent;
        let victim = match rule {
            BruteRule::Streaming => lo,
            BruteRule::H2o => argmin((lo..hi).map(|i| self.entries[i].1)) + lo,
            BruteRule::Tova => argmin((lo..hi).map(|i| row[i])) + lo,
        };
        Some(self.entries.remove(victim).0)
    }

    pub fn positions(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}
