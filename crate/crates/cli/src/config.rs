use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use treekv_core::model::{synthetic_tokens, synthetic_vectors};
use treekv_core::{generate_weights, ModelDims, ModelWeights, Policy, PolicyKind, ProtectedZones};

use crate::error::{CliError, Result};
use crate::weights_io;

/// How much of each step a decode trace records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TraceDetail {
    /// Retained positions and attention rows for every step.
    Full,
    /// Eviction events every step; retained sets and rows only at the
    /// analysis step and the final step.
    Events,
}

/// Every knob of a run. Serialized as the JSON config file; each field can be
/// overridden by the flag of the same name (`cache_size` ↔ `--cache-size`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub policy: String,
    pub cache_size: usize,
    pub zones: String,
    pub block_size: usize,
    pub cache_blocks: usize,
    pub seed: u64,
    pub seq_len: usize,
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_head: usize,
    pub vocab: usize,
    pub levels: usize,
    pub exclude: usize,
    /// 1-based decoding step whose attention rows and values are kept for
    /// wavelet analysis. Clamped to `seq_len`.
    pub analysis_step: usize,
    pub trace_detail: TraceDetail,
    /// Whitespace-separated token ids; synthetic tokens when absent.
    pub tokens: Option<PathBuf>,
    /// `TKVW` weight file; generated from `seed` when absent.
    pub weights: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            policy: "treekv".into(),
            cache_size: 1024,
            zones: "sink=4,recent=508".into(),
            block_size: 16,
            cache_blocks: 64,
            seed: 0,
            seq_len: 2048,
            layers: 2,
            heads: 4,
            d_model: 64,
            d_head: 16,
            vocab: 256,
            levels: 5,
            exclude: 32,
            analysis_step: 512,
            trace_detail: TraceDetail::Events,
            tokens: None,
            weights: None,
        }
    }
}

/// Flag overrides for [`RunConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON config file; defaults are used for missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// full | streaming | h2o | tova | treekv | treekv-left
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long, alias = "cache_size")]
    pub cache_size: Option<usize>,
    /// e.g. "sink=4,recent=508" or "none"
    #[arg(long)]
    pub zones: Option<String>,
    #[arg(long, alias = "block_size")]
    pub block_size: Option<usize>,
    #[arg(long, alias = "cache_blocks")]
    pub cache_blocks: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, alias = "seq_len")]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long, alias = "d_model")]
    pub d_model: Option<usize>,
    #[arg(long, alias = "d_head")]
    pub d_head: Option<usize>,
    #[arg(long)]
    pub vocab: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub exclude: Option<usize>,
    #[arg(long, alias = "analysis_step")]
    pub analysis_step: Option<usize>,
    #[arg(long, alias = "trace_detail", value_enum)]
    pub trace_detail: Option<TraceDetail>,
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        Ok(self.apply(base))
    }

    pub fn apply(&self, mut c: RunConfig) -> RunConfig {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(
            policy, cache_size, zones, block_size, cache_blocks, seed, seq_len, layers, heads, d_model, d_head,
            vocab, levels, exclude, analysis_step, trace_detail
        );
        if self.tokens.is_some() {
            c.tokens = self.tokens.clone();
        }
        if self.weights.is_some() {
            c.weights = self.weights.clone();
        }
        c
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn policy_kind(&self) -> Result<PolicyKind> {
        Ok(self.policy.parse()?)
    }

    pub fn protected_zones(&self) -> Result<ProtectedZones> {
        Ok(self.zones.parse()?)
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims::new(self.layers, self.heads, self.d_model, self.d_head, self.vocab)
    }

    pub fn effective_analysis_step(&self) -> usize {
        self.analysis_step.clamp(1, self.seq_len.max(1))
    }

    /// Checks every precondition a run depends on, naming the first that
    /// fails.
    pub fn validate(&self) -> Result<()> {
        let kind = self.policy_kind()?;
        let zones = self.protected_zones()?;
        self.dims().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.seq_len == 0 {
            return Err(CliError::Config("seq_len must be at least 1".into()));
        }
        Policy::new(kind, self.cache_size, zones)?;
        if self.block_size == 0 {
            return Err(CliError::Config("block_size must be at least 1".into()));
        }
        if self.cache_blocks < 2 {
            return Err(CliError::Config("cache_blocks must be at least 2".into()));
        }
        if self.levels == 0 {
            return Err(CliError::Config("levels must be at least 1".into()));
        }
        if self.tokens.is_some() && self.vocab == 0 {
            return Err(CliError::Config("a token file needs vocab >= 1".into()));
        }
        Ok(())
    }

    /// Loads or generates the model weights.
    pub fn load_weights(&self) -> Result<ModelWeights> {
        match &self.weights {
            Some(path) => {
                let w = weights_io::read(path)?;
                if w.dims != self.dims() {
                    return Err(CliError::Input(format!(
                        "weight file dims {:?} differ from configured {:?}",
                        w.dims,
                        self.dims()
                    )));
                }
                Ok(w)
            }
            None => Ok(generate_weights(self.seed, self.dims())?),
        }
    }

    /// Token ids of the input stream, when the model has a vocabulary.
    pub fn load_tokens(&self) -> Result<Option<Vec<usize>>> {
        if self.vocab == 0 {
            return Ok(None);
        }
        let tokens = match &self.tokens {
            Some(path) => {
                let all = read_token_file(path)?;
                if all.len() < self.seq_len {
                    return Err(CliError::Input(format!(
                        "{} holds {} tokens, seq_len is {}",
                        path.display(),
                        all.len(),
                        self.seq_len
                    )));
                }
                all[..self.seq_len].to_vec()
            }
            None => synthetic_tokens(self.seed, self.seq_len, self.vocab)?,
        };
        if let Some(bad) = tokens.iter().find(|t| **t >= self.vocab) {
            return Err(CliError::Input(format!("token id {bad} outside vocabulary of {}", self.vocab)));
        }
        Ok(Some(tokens))
    }

    /// Input vectors for every step, with the token ids they came from.
    pub fn inputs(&self, weights: &ModelWeights) -> Result<Inputs> {
        match self.load_tokens()? {
            Some(tokens) => {
                let xs = tokens.iter().map(|t| weights.embed(*t)).collect::<treekv_core::Result<Vec<_>>>()?;
                Ok((xs, Some(tokens)))
            }
            None => Ok((synthetic_vectors(self.seed, self.seq_len, self.d_model), None)),
        }
    }
}

/// Per-step input vectors and, for token streams, the ids behind them.
pub type Inputs = (Vec<Vec<f64>>, Option<Vec<usize>>);

pub fn read_token_file(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.split_whitespace()
        .map(|t| t.parse().map_err(|_| CliError::Input(format!("{}: {t:?} is not a token id", path.display()))))
        .collect()
}
