//! `TKVW` weight files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `TKVW`                  |
//! | 4      | 2    | version (u16, currently 1)    |
//! | 6      | 4    | layers (u32)                  |
//! | 10     | 4    | heads (u32)                   |
//! | 14     | 4    | d_model (u32)                 |
//! | 18     | 4    | d_head (u32)                  |
//! | 22     | 4    | vocab (u32, 0 = no embedding) |
//! | 26     | 8    | seed (u64)                    |
//! | 34     | ...  | matrices as f32, row-major    |
//!
//! Matrix order: for each layer, for each head `W_Q`, `W_K`, `W_V`
//! (`d_model × d_head`), then the layer's `W_O` (`heads·d_head × d_model`);
//! after all layers the embedding (`vocab × d_model`) and output projection
//! (`d_model × vocab`) when `vocab > 0`. This is also the order in which
//! [`treekv_core::generate_weights`] draws them.

use std::fs;
use std::path::Path;

use treekv_core::{ModelDims, ModelWeights};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"TKVW";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 34;

pub fn encode(weights: &ModelWeights) -> Vec<u8> {
    let d = weights.dims;
    let count = d.parameter_count().unwrap_or(0);
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * count);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [d.layers, d.heads, d.d_model, d.d_head, d.vocab] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&weights.seed.to_le_bytes());
    for m in weights.matrices() {
        for w in m.data() {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ModelWeights> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(CliError::Input("not a TKVW weight file".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(CliError::Input(format!("unsupported weight file version {version}")));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    let dims = ModelDims::new(u32_at(6), u32_at(10), u32_at(14), u32_at(18), u32_at(22));
    let seed = u64::from_le_bytes(bytes[26..34].try_into().unwrap());
    dims.validate()?;
    let expected = dims.parameter_count().expect("validated") * 4;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(CliError::Input(format!("weight body has {} bytes, header implies {expected}", body.len())));
    }
    let mut floats = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let shapes = matrix_shapes(dims);
    let matrices = shapes.into_iter().map(|(r, c)| floats.by_ref().take(r * c).collect::<Vec<f32>>());
    Ok(ModelWeights::from_matrices(dims, seed, matrices)?)
}

fn matrix_shapes(d: ModelDims) -> Vec<(usize, usize)> {
    let mut shapes = Vec::new();
    for _ in 0..d.layers {
        for _ in 0..d.heads {
            shapes.extend([(d.d_model, d.d_head); 3]);
        }
        shapes.push((d.heads * d.d_head, d.d_model));
    }
    if d.vocab > 0 {
        shapes.push((d.vocab, d.d_model));
        shapes.push((d.d_model, d.vocab));
    }
    shapes
}

pub fn write(path: &Path, weights: &ModelWeights) -> Result<()> {
    fs::write(path, encode(weights)).map_err(|e| CliError::io(path, e))
}

pub fn read(path: &Path) -> Result<ModelWeights> {
    decode(&fs::read(path).map_err(|e| CliError::io(path, e))?)
}
