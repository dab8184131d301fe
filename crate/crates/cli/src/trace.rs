//! Decode traces as JSON lines.
//!
//! The first line is a `header` record carrying the full config and a
//! fingerprint of weights, config and token stream. Then one `step` record
//! per decoded token, in order, and a closing `end` record holding the final
//! retained positions of every (layer, head). A trace without its `end`
//! record is truncated.
//!
//! Eviction events name the 1-based slot that was removed and, for tree
//! policies, the 1-based cursor that selected it.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TraceRecord {
    Header(TraceHeader),
    Step(StepLine),
    End(EndLine),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub fingerprint: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLine {
    /// 0-based position of the token decoded at this step.
    pub step: usize,
    /// NLL of the next token under the output head, when the model has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nll: Option<f64>,
    /// Set on the step kept for wavelet analysis.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub analysis: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub streams: Vec<StreamLine>,
    #[serde(default)]
    pub evictions: Vec<EvictionLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamLine {
    pub layer: usize,
    pub head: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retained: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvictionLine {
    pub step: usize,
    pub layer: usize,
    pub head: usize,
    pub position: usize,
    pub slot: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cursor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndLine {
    pub steps: usize,
    /// Layer-major, one list per (layer, head).
    pub retained: Vec<Vec<usize>>,
}

/// A parsed trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<StepLine>,
    pub end: Option<EndLine>,
}

impl Trace {
    pub fn config(&self) -> &RunConfig {
        &self.header.config
    }

    /// Fails unless the trace covers every configured step and is closed.
    pub fn require_complete(&self) -> Result<&EndLine> {
        let expected = self.config().seq_len;
        match &self.end {
            Some(end) if end.steps == expected && self.steps.len() == expected => Ok(end),
            _ => Err(CliError::Input(format!(
                "truncated trace: {} of {expected} steps{}",
                self.steps.len(),
                if self.end.is_some() { "" } else { ", no end record" }
            ))),
        }
    }

    pub fn analysis_step(&self) -> Option<&StepLine> {
        self.steps.iter().find(|s| s.analysis)
    }
}

/// SHA-256 over the weight file bytes, the config JSON and the token ids.
pub fn fingerprint(weight_bytes: &[u8], config: &RunConfig, tokens: Option<&[usize]>) -> Result<String> {
    let mut h = Sha256::new();
    h.update(weight_bytes);
    h.update(serde_json::to_vec(config)?);
    if let Some(tokens) = tokens {
        for t in tokens {
            h.update((*t as u64).to_le_bytes());
        }
    }
    Ok(hex::encode(h.finalize()))
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, record: &TraceRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n").map_err(|e| CliError::io("<trace>", e))
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| CliError::io("<trace>", e))?;
        Ok(self.out)
    }
}

pub fn parse(reader: impl BufRead) -> Result<Trace> {
    let mut header = None;
    let mut steps = Vec::new();
    let mut end = None;
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io("<trace>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::Input(format!("trace line {}: {e}", n + 1)))?;
        match (record, &header, &end) {
            (TraceRecord::Header(h), None, _) => header = Some(h),
            (_, None, _) => return Err(CliError::Input("trace does not start with a header".into())),
            (_, _, Some(_)) => return Err(CliError::Input("records after the end record".into())),
            (TraceRecord::Header(_), Some(_), _) => return Err(CliError::Input("duplicate header".into())),
            (TraceRecord::Step(s), Some(_), None) => {
                if s.step != steps.len() {
                    return Err(CliError::Input(format!("step {} where {} was expected", s.step, steps.len())));
                }
                steps.push(s);
            }
            (TraceRecord::End(e), Some(_), None) => end = Some(e),
        }
    }
    let header = header.ok_or_else(|| CliError::Input("empty trace".into()))?;
    if header.version != TRACE_VERSION {
        return Err(CliError::Input(format!("unsupported trace version {}", header.version)));
    }
    Ok(Trace { header, steps, end })
}

pub fn read(path: &Path) -> Result<Trace> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse(BufReader::new(f))
}

/// Replays the eviction events from an empty cache and checks that every
/// recorded retained set, and the final one, is reproduced exactly.
pub fn verify_replay(trace: &Trace) -> Result<()> {
    let cfg = trace.config();
    let streams = cfg.layers * cfg.heads;
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); streams];
    for step in &trace.steps {
        sets.iter_mut().for_each(|s| s.push(step.step));
        for ev in &step.evictions {
            let set = &mut sets[ev.layer * cfg.heads + ev.head];
            let slot = ev.slot.checked_sub(1).filter(|s| *s < set.len());
            match slot {
                Some(i) if set[i] == ev.position => {
                    set.remove(i);
                }
                _ => {
                    return Err(CliError::Input(format!(
                        "step {}: eviction of position {} from slot {} does not match the replayed cache",
                        step.step, ev.position, ev.slot
                    )))
                }
            }
        }
        for s in &step.streams {
            if let Some(retained) = &s.retained {
                if retained != &sets[s.layer * cfg.heads + s.head] {
                    return Err(CliError::Input(format!(
                        "step {}: recorded retained set of ({}, {}) differs from replay",
                        step.step, s.layer, s.head
                    )));
                }
            }
        }
    }
    if let Some(end) = &trace.end {
        if end.retained != sets {
            return Err(CliError::Input("final retained sets differ from replay".into()));
        }
    }
    Ok(())
}
