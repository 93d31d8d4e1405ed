//! Pulse counting between consecutive bayan strokes and the 16x16
//! co-occurrence matrix of consecutive pulse-count pairs.

use serde::{Deserialize, Serialize};

use crate::envelope::PeakSignal;
use crate::error::{Result, TalaError};
use crate::strokes::BayanStrokeSignal;

/// Largest pulse count the matrix can hold.
pub const MAX_PULSES: usize = 16;
/// Alignment slack between a bayan stroke and its full-band peak.
pub const ALIGNMENT_EPS_S: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseCountSeries {
    pub counts: Vec<u8>,
    /// Indices of intervals whose raw count exceeded [`MAX_PULSES`].
    pub clamped_high: Vec<usize>,
    /// Indices of intervals with no peak at all, raised to 1.
    pub raised_empty: Vec<usize>,
}

impl PulseCountSeries {
    /// Builds a series from counts already in `1..=16`.
    pub fn from_counts(counts: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = counts.iter().find(|&&c| c == 0 || usize::from(c) > MAX_PULSES) {
            return Err(TalaError::InvalidSpec(format!("pulse count {bad} outside 1..={MAX_PULSES}")));
        }
        Ok(Self { counts, clamped_high: Vec::new(), raised_empty: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Counts peak-signal peaks in `[b_i - eps, b_{i+1} - eps)` for every pair
/// of consecutive bayan strokes.
///
/// The peak that coincides with the opening stroke is inside the interval
/// and the one at the closing stroke is not, so five peaks strictly between
/// two strokes give a count of six.
pub fn count_pulses(peaks: &PeakSignal, bayan: &BayanStrokeSignal) -> Result<PulseCountSeries> {
    count_pulses_with(peaks, bayan, ALIGNMENT_EPS_S)
}

pub fn count_pulses_with(peaks: &PeakSignal, bayan: &BayanStrokeSignal, eps_s: f64) -> Result<PulseCountSeries> {
    let strokes = bayan.times();
    if strokes.len() < 3 {
        return Err(TalaError::InsufficientBayanStrokes { found: strokes.len() });
    }
    let times = peaks.times();
    let mut series = PulseCountSeries { counts: Vec::with_capacity(strokes.len() - 1), clamped_high: Vec::new(), raised_empty: Vec::new() };
    for (i, w) in strokes.windows(2).enumerate() {
        let (lo, hi) = (w[0] - eps_s, w[1] - eps_s);
        let start = times.partition_point(|&t| t < lo);
        let end = times.partition_point(|&t| t < hi);
        let raw = end.saturating_sub(start);
        let count = if raw == 0 {
            series.raised_empty.push(i);
            1
        } else if raw > MAX_PULSES {
            series.clamped_high.push(i);
            MAX_PULSES
        } else {
            raw
        };
        series.counts.push(count as u8);
    }
    Ok(series)
}

/// 16x16 tally of consecutive pulse-count pairs. `cells[a - 1][b - 1]`
/// holds how often count `a` was followed by count `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub cells: [[u32; MAX_PULSES]; MAX_PULSES],
    pub total: u32,
}

impl Default for CooccurrenceMatrix {
    fn default() -> Self {
        Self { cells: [[0; MAX_PULSES]; MAX_PULSES], total: 0 }
    }
}

impl CooccurrenceMatrix {
    /// Cell for 1-based pulse counts.
    pub fn get(&self, a: u8, b: u8) -> u32 {
        self.cells[usize::from(a) - 1][usize::from(b) - 1]
    }

    /// Non-zero cells as `(a, b, count)` with 1-based counts, row-major.
    pub fn nonzero(&self) -> Vec<(u8, u8, u32)> {
        let mut out = Vec::new();
        for (r, row) in self.cells.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v > 0 {
                    out.push((r as u8 + 1, c as u8 + 1, v));
                }
            }
        }
        out
    }
}

pub fn build_matrix(series: &PulseCountSeries) -> Result<CooccurrenceMatrix> {
    if series.len() < 2 {
        return Err(TalaError::SeriesTooShort { len: series.len() });
    }
    let mut m = CooccurrenceMatrix::default();
    for w in series.counts.windows(2) {
        m.cells[usize::from(w[0]) - 1][usize::from(w[1]) - 1] += 1;
        m.total += 1;
    }
    Ok(m)
}

/// Most frequent consecutive pair. `pcmax_1` and `pcmax_2` are pulse counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominantPattern {
    pub pcmax_1: u8,
    pub pcmax_2: u8,
    pub occurrences: u32,
}

/// Arg-max cell; ties go to the smallest row, then the smallest column.
pub fn dominant_pattern(matrix: &CooccurrenceMatrix) -> Result<DominantPattern> {
    let mut best: Option<DominantPattern> = None;
    for (r, row) in matrix.cells.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > 0 && best.is_none_or(|b| v > b.occurrences) {
                best = Some(DominantPattern { pcmax_1: r as u8 + 1, pcmax_2: c as u8 + 1, occurrences: v });
            }
        }
    }
    best.ok_or(TalaError::EmptyMatrix)
}
