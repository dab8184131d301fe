//! Multi-level Haar wavelet decomposition and single-band reconstruction.
//!
//! With 1-based indexing the analysis filters give
//! `A[n] = (s[2n-1] + s[2n]) / √2` and `D[n] = (s[2n-1] - s[2n]) / √2`,
//! and the inverse is `(A[m] + D[m]) / √2` at odd `n = 2m - 1` and
//! `(A[m] - D[m]) / √2` at even `n = 2m`.
//!
//! Odd-length inputs are padded with one trailing zero at every level and
//! the padding is trimmed again on reconstruction. Analyses should prefer
//! power-of-two lengths so no boundary coefficients appear.

use alloc::vec::Vec;

use crate::error::{bail, Result};

const INV_SQRT2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Coefficients of an `L`-level decomposition, `[A_L, D_L, …, D_1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    approx: Vec<f64>,
    /// `details[0]` is `D_L`, the last entry is `D_1`.
    details: Vec<Vec<f64>>,
    /// Input length at each level, `lengths[0]` being the signal length.
    lengths: Vec<usize>,
}

/// Selects one band of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// `A_L`.
    Approximation,
    /// `D_l` for `l` in `1..=L`.
    Detail(usize),
}

impl WaveletCoeffs {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn signal_len(&self) -> usize {
        self.lengths[0]
    }

    pub fn approximation(&self) -> &[f64] {
        &self.approx
    }

    /// `D_level`, 1-based.
    pub fn detail(&self, level: usize) -> Option<&[f64]> {
        let l = self.levels();
        (1..=l).contains(&level).then(|| self.details[l - level].as_slice())
    }

    /// Coefficients in list order `[A_L, D_L, …, D_1]`.
    pub fn as_list(&self) -> Vec<&[f64]> {
        core::iter::once(self.approx.as_slice()).chain(self.details.iter().map(Vec::as_slice)).collect()
    }

    pub fn bands(&self) -> Vec<Band> {
        core::iter::once(Band::Approximation).chain((1..=self.levels()).rev().map(Band::Detail)).collect()
    }

    fn band_mut(&mut self, band: Band) -> Option<&mut Vec<f64>> {
        let l = self.levels();
        match band {
            Band::Approximation => Some(&mut self.approx),
            Band::Detail(level) if (1..=l).contains(&level) => Some(&mut self.details[l - level]),
            Band::Detail(_) => None,
        }
    }
}

/// One analysis step: `(A_1, D_1)`, each of length `ceil(N / 2)`.
pub fn dwt_single(signal: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if signal.is_empty() {
        bail!(Input, "cannot decompose an empty signal");
    }
    let half = signal.len().div_ceil(2);
    let mut approx = Vec::with_capacity(half);
    let mut detail = Vec::with_capacity(half);
    for pair in signal.chunks(2) {
        let (a, b) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        approx.push((a + b) * INV_SQRT2);
        detail.push((a - b) * INV_SQRT2);
    }
    Ok((approx, detail))
}

/// Decomposes `levels` times, feeding each approximation into the next
/// step. Every level must start from at least two samples.
pub fn dwt_multi(signal: &[f64], levels: usize) -> Result<WaveletCoeffs> {
    if levels == 0 {
        bail!(Level, "decomposition needs at least one level");
    }
    if signal.is_empty() {
        bail!(Input, "cannot decompose an empty signal");
    }
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    for level in 1..=levels {
        if approx.len() < 2 {
            bail!(Level, "{levels} levels too deep for a signal of {} samples (stopped at {level})", signal.len());
        }
        lengths.push(approx.len());
        let (a, d) = dwt_single(&approx)?;
        approx = a;
        details.push(d);
    }
    details.reverse();
    Ok(WaveletCoeffs { approx, details, lengths })
}

/// One synthesis step; output length is `2 · len(A)`.
pub fn reconstruct_single(approx: &[f64], detail: &[f64]) -> Result<Vec<f64>> {
    if approx.len() != detail.len() {
        bail!(Dimension, "approximation of {} against detail of {}", approx.len(), detail.len());
    }
    let mut out = Vec::with_capacity(2 * approx.len());
    for (a, d) in approx.iter().zip(detail) {
        out.push((a + d) * INV_SQRT2);
        out.push((a - d) * INV_SQRT2);
    }
    Ok(out)
}

/// Inverts a full decomposition.
pub fn reconstruct(coeffs: &WaveletCoeffs) -> Result<Vec<f64>> {
    let mut current = coeffs.approx.clone();
    for (detail, len) in coeffs.details.iter().zip(coeffs.lengths.iter().rev()) {
        current = reconstruct_single(&current, detail)?;
        current.truncate(*len);
    }
    Ok(current)
}

/// Reconstructs the contribution of a single band with every other band
/// zeroed, e.g. `Rec(D_L) = R(R(…R(0, D_L)…, 0), 0)`.
pub fn reconstruct_component(coeffs: &WaveletCoeffs, band: Band) -> Result<Vec<f64>> {
    let mut isolated = WaveletCoeffs {
        approx: alloc::vec![0.0; coeffs.approx.len()],
        details: coeffs.details.iter().map(|d| alloc::vec![0.0; d.len()]).collect(),
        lengths: coeffs.lengths.clone(),
    };
    let source = match band {
        Band::Approximation => &coeffs.approx,
        Band::Detail(level) => match coeffs.detail(level) {
            Some(_) => &coeffs.details[coeffs.levels() - level],
            None => bail!(Selector, "band D{level} not in a {}-level decomposition", coeffs.levels()),
        },
    };
    let target = isolated.band_mut(band).expect("band checked above");
    target.copy_from_slice(source);
    reconstruct(&isolated)
}

/// Attention row and value vectors of one (layer, head) at the analysis
/// step. Channel `j` yields the signal `s[k] = a[k] · v_k[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSample {
    pub attention: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Mean absolute reconstructed detail magnitude per band and position.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeProfile {
    pub levels: usize,
    /// First position reported (the excluded leading margin).
    pub start: usize,
    /// `values[l - 1][i]` is band `D_l` at position `start + i`.
    pub values: Vec<Vec<f64>>,
}

impl MagnitudeProfile {
    pub fn positions(&self) -> core::ops::Range<usize> {
        self.start..self.start + self.values.first().map_or(0, Vec::len)
    }

    /// `(position, level, magnitude)` triples, position-major.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.positions()
            .enumerate()
            .flat_map(move |(i, p)| (1..=self.levels).map(move |l| (p, l, self.values[l - 1][i])))
    }
}

/// Decomposes every channel of every sample, reconstructs each detail band
/// on its own and averages `|Rec(D_l)[k]|` over channels and samples.
/// Positions within `exclude` of either end are dropped.
///
/// Sums run in a fixed order (samples, then channels), so the result does
/// not depend on how samples were gathered.
pub fn magnitude_profile(samples: &[AnalysisSample], levels: usize, exclude: usize) -> Result<MagnitudeProfile> {
    let Some(first) = samples.first() else {
        bail!(Input, "no analysis samples");
    };
    let len = first.attention.len();
    if levels == 0 || levels >= usize::BITS as usize || len < (1usize << levels) {
        bail!(Level, "analysis step of {len} tokens is shorter than 2^{levels}");
    }
    if 2 * exclude >= len {
        bail!(Input, "excluding {exclude} tokens at both ends leaves nothing of {len}");
    }
    let kept = exclude..len - exclude;
    let mut sums = alloc::vec![alloc::vec![0.0; kept.len()]; levels];
    let mut count = 0usize;
    for sample in samples {
        if sample.attention.len() != len || sample.values.len() != len {
            bail!(Dimension, "analysis samples disagree on length ({len} expected)");
        }
        let width = sample.values.first().map_or(0, Vec::len);
        for channel in 0..width {
            let signal: Vec<f64> = sample
                .attention
                .iter()
                .zip(&sample.values)
                .map(|(a, v)| v.get(channel).map(|x| a * x))
                .collect::<Option<_>>()
                .ok_or_else(|| crate::Error::Dimension("ragged value vectors".into()))?;
            let coeffs = dwt_multi(&signal, levels)?;
            for (level, acc) in (1..=levels).zip(sums.iter_mut()) {
                let component = reconstruct_component(&coeffs, Band::Detail(level))?;
                for (s, c) in acc.iter_mut().zip(&component[kept.clone()]) {
                    *s += c.abs();
                }
            }
            count += 1;
        }
    }
    if count == 0 {
        bail!(Input, "analysis samples carry no value channels");
    }
    for band in sums.iter_mut() {
        band.iter_mut().for_each(|s| *s /= count as f64);
    }
    Ok(MagnitudeProfile { levels, start: exclude, values: sums })
}
