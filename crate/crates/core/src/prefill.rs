//! Block-level tree compression of a prompt's KV cache.
//!
//! The prompt is cut into blocks of `b` tokens. The final block is the
//! observation window: its queries score every earlier token, and a block's
//! score is the mean over its tokens. The tree sweep then runs over the
//! content blocks as if they arrived one by one, using those fixed scores.
//! The window itself is always kept and never enters the sweep.

use alloc::vec::Vec;
use core::ops::Range;

use crate::cache::KvCache;
use crate::error::{bail, Result};
use crate::policy::{choose_in_scope, TreeMode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    block_size: usize,
    blocks: Vec<Range<usize>>,
}

impl BlockPartition {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn prompt_len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub fn observation_window(&self) -> Range<usize> {
        self.blocks.last().cloned().unwrap_or(0..0)
    }

    /// Number of blocks that take part in eviction.
    pub fn content_blocks(&self) -> usize {
        self.blocks.len().saturating_sub(1)
    }
}

/// Splits `prompt_len` tokens into `ceil(prompt_len / b)` blocks.
pub fn partition_blocks(prompt_len: usize, block_size: usize) -> Result<BlockPartition> {
    if block_size == 0 {
        bail!(Config, "block size must be at least 1");
    }
    if prompt_len < block_size {
        bail!(Input, "prompt of {prompt_len} tokens is shorter than one block of {block_size}");
    }
    let blocks = (0..prompt_len)
        .step_by(block_size)
        .map(|start| start..(start + block_size).min(prompt_len))
        .collect();
    Ok(BlockPartition { block_size, blocks })
}

/// Per-block scores, indexed like the partition's blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockScores(pub Vec<f64>);

/// Mean attention each token receives from the observation-window queries.
/// `rows` are causal softmax rows padded to the prompt length.
pub fn token_scores(rows: &[Vec<f64>], prompt_len: usize) -> Result<Vec<f64>> {
    if rows.is_empty() {
        bail!(Input, "no observation rows");
    }
    let mut means = alloc::vec![0.0; prompt_len];
    for row in rows {
        if row.len() != prompt_len {
            bail!(Dimension, "observation row of length {} for prompt of {prompt_len}", row.len());
        }
        for (m, a) in means.iter_mut().zip(row) {
            *m += a;
        }
    }
    let n = rows.len() as f64;
    means.iter_mut().for_each(|m| *m /= n);
    Ok(means)
}

/// Averages token scores over each block's actual length.
pub fn block_means(token_scores: &[f64], partition: &BlockPartition) -> Result<BlockScores> {
    if token_scores.len() != partition.prompt_len() {
        bail!(Dimension, "{} token scores for prompt of {}", token_scores.len(), partition.prompt_len());
    }
    Ok(BlockScores(
        partition
            .blocks()
            .iter()
            .map(|b| token_scores[b.clone()].iter().sum::<f64>() / b.len() as f64)
            .collect(),
    ))
}

/// Block scores from the observation window's attention rows.
pub fn observation_scores(rows: &[Vec<f64>], partition: &BlockPartition) -> Result<BlockScores> {
    block_means(&token_scores(rows, partition.prompt_len())?, partition)
}

/// Replays the tree sweep over content blocks and returns retained block
/// indices in prompt order, observation window last.
pub fn treekv_prefill_compress(
    partition: &BlockPartition,
    scores: &BlockScores,
    cache_blocks: usize,
    mode: TreeMode,
) -> Result<Vec<usize>> {
    if cache_blocks < 2 {
        bail!(Config, "cache_blocks must be at least 2, got {cache_blocks}");
    }
    if scores.0.len() != partition.len() {
        bail!(Dimension, "{} block scores for {} blocks", scores.0.len(), partition.len());
    }
    let window = partition.len() - 1;
    let mut kept: Vec<usize> = Vec::with_capacity(cache_blocks + 1);
    let mut idx = 1;
    for block in 0..window {
        kept.push(block);
        if kept.len() > cache_blocks {
            let (left, right) = (idx - 1, idx);
            let victim =
                if choose_in_scope(mode, scores.0[kept[left]], scores.0[kept[right]]) { right } else { left };
            kept.remove(victim);
            idx = idx % cache_blocks + 1;
        }
    }
    kept.push(window);
    Ok(kept)
}

/// Token ranges of the retained blocks.
pub fn retained_ranges(partition: &BlockPartition, retained: &[usize]) -> Vec<Range<usize>> {
    retained.iter().map(|b| partition.blocks()[*b].clone()).collect()
}

/// Drops the KV pairs of evicted blocks. Survivors keep their order; at
/// attention time they are encoded at slot indices `0..len`, which makes the
/// re-assigned positions contiguous.
pub fn compress_cache(cache: &KvCache, partition: &BlockPartition, retained: &[usize]) -> KvCache {
    let ranges = retained_ranges(partition, retained);
    let mut out = cache.clone();
    out.retain(|s| ranges.iter().any(|r| r.contains(&s.position)));
    let mut sized = KvCache::new(out.len().max(1));
    for s in out.slots() {
        // positions stay strictly increasing, so append cannot fail
        let _ = sized.append(s.key.clone(), s.value.clone(), s.position);
    }
    sized
}
