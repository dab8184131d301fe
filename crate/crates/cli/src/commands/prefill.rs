use serde_json::json;
use treekv_core::prefill::{
    compress_cache, observation_scores, partition_blocks, retained_ranges, treekv_prefill_compress, BlockScores,
};
use treekv_core::{prefill_forward, PolicyKind, TreeMode};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Where block scores come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PrefillInput {
    /// Run the model over the configured prompt (token file or synthetic).
    Model,
    /// Use fixed block scores, one per block of a `seq_len`-token prompt.
    BlockScores(Vec<f64>),
}

fn mode(config: &RunConfig) -> Result<TreeMode> {
    match config.policy_kind()? {
        PolicyKind::TreeKvLeft => Ok(TreeMode::SelectLeft),
        PolicyKind::TreeKv => Ok(TreeMode::ScoreDriven),
        other => Err(CliError::Config(format!("prefill compression needs a tree policy, got {other}"))),
    }
}

fn ranges_json(ranges: &[std::ops::Range<usize>]) -> serde_json::Value {
    json!(ranges.iter().map(|r| [r.start, r.end]).collect::<Vec<_>>())
}

/// Compresses a prompt block-wise and returns JSON lines: one `stream`
/// record per (layer, head) (or one `scores` record for fixed scores),
/// followed by a `summary` record.
pub fn run_prefill(config: &RunConfig, input: &PrefillInput) -> Result<String> {
    let mode = mode(config)?;
    if config.cache_blocks < 2 {
        return Err(CliError::Config("cache_blocks must be at least 2".into()));
    }
    let partition = partition_blocks(config.seq_len, config.block_size)?;
    let mut lines = Vec::new();
    let mut retained_tokens = Vec::new();
    match input {
        PrefillInput::BlockScores(scores) => {
            let kept = treekv_prefill_compress(&partition, &BlockScores(scores.clone()), config.cache_blocks, mode)?;
            let ranges = retained_ranges(&partition, &kept);
            let tokens: usize = ranges.iter().map(|r| r.len()).sum();
            retained_tokens.push(tokens);
            lines.push(json!({
                "type": "scores",
                "retained_blocks": kept,
                "retained_ranges": ranges_json(&ranges),
                "retained_tokens": tokens,
            }));
        }
        PrefillInput::Model => {
            config.validate()?;
            let weights = config.load_weights()?;
            let (inputs, _) = config.inputs(&weights)?;
            let fwd = prefill_forward(&weights, &inputs, partition.observation_window())?;
            for (i, (rows, cache)) in fwd.window_rows.iter().zip(&fwd.caches).enumerate() {
                let scores = observation_scores(rows, &partition)?;
                let kept = treekv_prefill_compress(&partition, &scores, config.cache_blocks, mode)?;
                let ranges = retained_ranges(&partition, &kept);
                let compressed = compress_cache(cache, &partition, &kept);
                retained_tokens.push(compressed.len());
                lines.push(json!({
                    "type": "stream",
                    "layer": i / config.heads,
                    "head": i % config.heads,
                    "block_scores": scores.0,
                    "retained_blocks": kept,
                    "retained_ranges": ranges_json(&ranges),
                    "retained_tokens": compressed.len(),
                }));
            }
        }
    }
    let total: usize = retained_tokens.iter().sum();
    lines.push(json!({
        "type": "summary",
        "prompt_len": partition.prompt_len(),
        "block_size": partition.block_size(),
        "blocks": partition.len(),
        "cache_blocks": config.cache_blocks,
        "observation_window": [partition.observation_window().start, partition.observation_window().end],
        "mean_retained_tokens": total as f64 / retained_tokens.len() as f64,
        "compression_ratio": total as f64 / (retained_tokens.len() * partition.prompt_len()) as f64,
    }));
    let mut out = String::new();
    for l in lines {
        out.push_str(&serde_json::to_string(&l)?);
        out.push('\n');
    }
    Ok(out)
}
