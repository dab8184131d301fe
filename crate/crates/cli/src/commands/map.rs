use std::fmt::Write;

use crate::error::Result;
use crate::trace::Trace;

/// Fraction of heads in each layer that still hold each original position
/// at the final step. One CSV row per layer, one column per position.
pub fn run_map(trace: &Trace) -> Result<String> {
    let end = trace.require_complete()?;
    let cfg = trace.config();
    let (heads, len) = (cfg.heads, cfg.seq_len);
    let mut out = String::from("layer");
    for p in 0..len {
        write!(out, ",{p}").unwrap();
    }
    out.push('\n');
    for layer in 0..cfg.layers {
        let mut counts = vec![0usize; len];
        for retained in &end.retained[layer * heads..(layer + 1) * heads] {
            for p in retained {
                counts[*p] += 1;
            }
        }
        write!(out, "{layer}").unwrap();
        for c in counts {
            write!(out, ",{}", c as f64 / heads as f64).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}
