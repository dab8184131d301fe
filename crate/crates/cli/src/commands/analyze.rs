use std::fmt::Write;

use treekv_core::wavelet::{magnitude_profile, AnalysisSample};

use crate::error::{CliError, Result};
use crate::trace::Trace;

/// Wavelet magnitude profile of the trace's analysis step as
/// `position,band,mean_abs_magnitude` rows. Bands are the detail bands
/// `D1..D{levels}`; positions are cache slot indices, which equal token
/// positions when nothing was evicted.
pub fn run_analyze(trace: &Trace, levels: usize, exclude: usize) -> Result<String> {
    trace.require_complete()?;
    let step = trace
        .analysis_step()
        .ok_or_else(|| CliError::Input("trace has no analysis step".into()))?;
    let samples = step
        .streams
        .iter()
        .map(|s| match (&s.attention, &s.values) {
            (Some(a), Some(v)) => Ok(AnalysisSample { attention: a.clone(), values: v.clone() }),
            _ => Err(CliError::Input(format!("analysis step lacks rows or values for ({}, {})", s.layer, s.head))),
        })
        .collect::<Result<Vec<_>>>()?;
    let profile = magnitude_profile(&samples, levels, exclude)?;
    let mut out = String::from("position,band,mean_abs_magnitude\n");
    for (position, level, magnitude) in profile.rows() {
        writeln!(out, "{position},D{level},{magnitude}").unwrap();
    }
    Ok(out)
}
