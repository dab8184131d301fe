use std::io::Write;

use treekv_core::{Engine, ModelWeights, PolicyKind, StepRecord};

use crate::config::{RunConfig, TraceDetail};
use crate::error::{CliError, Result};
use crate::trace::{self, EndLine, EvictionLine, StepLine, StreamLine, TraceHeader, TraceRecord, TraceWriter};
use crate::weights_io;

/// Final state of a run, kept in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Layer-major retained positions per (layer, head).
    pub retained: Vec<Vec<usize>>,
    /// Next-token NLL per step, empty without an output head.
    pub nll: Vec<f64>,
    pub evictions: usize,
}

impl RunOutcome {
    pub fn mean_nll(&self) -> Option<f64> {
        (!self.nll.is_empty()).then(|| self.nll.iter().sum::<f64>() / self.nll.len() as f64)
    }
}

/// Runs the decoding loop, handing each step record and its next-token NLL
/// to `on_step`.
fn drive(
    config: &RunConfig,
    weights: &ModelWeights,
    inputs: &[Vec<f64>],
    tokens: Option<&[usize]>,
    mut on_step: impl FnMut(&StepRecord, Option<f64>, bool) -> Result<()>,
) -> Result<RunOutcome> {
    let kind = config.policy_kind()?;
    let mut engine = Engine::new(weights, kind, config.cache_size, config.protected_zones()?)?;
    let analysis = config.effective_analysis_step() - 1;
    let mut outcome = RunOutcome { retained: Vec::new(), nll: Vec::new(), evictions: 0 };
    for (t, x) in inputs.iter().enumerate() {
        let is_analysis = t == analysis;
        let record = if is_analysis { engine.step_capturing(x)? } else { engine.step(x)? };
        for s in &record.streams {
            if kind != PolicyKind::Full && s.retained.len() > config.cache_size {
                return Err(CliError::Internal(format!("step {t}: {} slots retained", s.retained.len())));
            }
        }
        outcome.evictions += record.streams.iter().filter(|s| s.eviction.is_some()).count();
        let nll = match tokens.and_then(|ts| ts.get(t + 1)) {
            Some(next) => Some(weights.token_nll(&record.hidden, *next)?),
            None => None,
        };
        if let Some(v) = nll {
            outcome.nll.push(v);
        }
        on_step(&record, nll, is_analysis)?;
    }
    outcome.retained = engine.streams().iter().map(|s| s.retained()).collect();
    Ok(outcome)
}

/// Decodes without writing a trace.
pub fn simulate(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let weights = config.load_weights()?;
    let (inputs, tokens) = config.inputs(&weights)?;
    drive(config, &weights, &inputs, tokens.as_deref(), |_, _, _| Ok(()))
}

/// Decodes and writes the JSON-lines trace to `out`.
pub fn run_decode<W: Write>(config: &RunConfig, out: W) -> Result<RunOutcome> {
    config.validate()?;
    let weights = config.load_weights()?;
    let (inputs, tokens) = config.inputs(&weights)?;
    let fingerprint = trace::fingerprint(&weights_io::encode(&weights), config, tokens.as_deref())?;
    let mut writer = TraceWriter::new(out);
    writer.write(&TraceRecord::Header(TraceHeader {
        version: trace::TRACE_VERSION,
        fingerprint,
        config: config.clone(),
    }))?;
    let last = inputs.len().saturating_sub(1);
    let outcome = drive(config, &weights, &inputs, tokens.as_deref(), |record, nll, is_analysis| {
        let t = record.position;
        let detailed = config.trace_detail == TraceDetail::Full || is_analysis || t == last;
        let streams = if detailed {
            record
                .streams
                .iter()
                .map(|s| StreamLine {
                    layer: s.layer,
                    head: s.head,
                    retained: Some(s.retained.clone()),
                    attention: Some(s.attention.to_vec()),
                    values: s.values.clone(),
                })
                .collect()
        } else {
            Vec::new()
        };
        let evictions = record
            .streams
            .iter()
            .filter_map(|s| {
                s.eviction.map(|e| EvictionLine {
                    step: t,
                    layer: s.layer,
                    head: s.head,
                    position: e.position,
                    slot: e.slot + 1,
                    cursor: e.cursor,
                })
            })
            .collect();
        writer.write(&TraceRecord::Step(StepLine { step: t, nll, analysis: is_analysis, streams, evictions }))
    })?;
    writer.write(&TraceRecord::End(EndLine { steps: inputs.len(), retained: outcome.retained.clone() }))?;
    writer.finish()?;
    Ok(outcome)
}
