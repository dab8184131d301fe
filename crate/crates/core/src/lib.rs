//! Tree-structured KV-cache eviction for transformer decoding and prompt
//! prefilling, with baseline policies, a small deterministic attention
//! engine to drive them, and Haar wavelet tools for inspecting
//! attention-weighted value signals.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod attention;
pub mod cache;
pub mod engine;
mod error;
pub mod model;
pub mod policy;
pub mod positions;
pub mod prefill;
pub mod rng;
pub mod wavelet;

pub use attention::{attend, AttentionRow};
pub use cache::{CacheSlot, KvCache};
pub use engine::{decode_with_policy, prefill_forward, Engine, HeadStream, StepRecord, StreamStep};
pub use error::{Error, Result};
pub use model::{generate_weights, project, ModelDims, ModelWeights, ProjectedStep};
pub use policy::{Eviction, ImportanceTracker, Policy, PolicyKind, ProtectedZones, TreeKvState, TreeMode};
pub use positions::apply_positions;
