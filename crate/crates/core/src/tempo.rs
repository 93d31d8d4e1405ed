//! Tempo from the bayan intervals that realise the dominant pulse pair.

use serde::{Deserialize, Serialize};

use crate::cooccurrence::{DominantPattern, PulseCountSeries};
use crate::error::{Result, TalaError};
use crate::strokes::BayanStrokeSignal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempoEstimate {
    /// Pulses per minute.
    pub bpm: f64,
    pub bayan_dur_s: f64,
    pub count_pulse: u32,
    pub pulse_dur_s: f64,
    /// Number of consecutive interval pairs equal to the dominant pair.
    pub n: u32,
    /// Matras per minute, when the theka is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matras_per_minute: Option<f64>,
}

impl TempoEstimate {
    /// Attaches the matra rate for a theka with `matras_per_pulse`.
    pub fn with_matra_ratio(mut self, matras_per_pulse: f64) -> Self {
        self.matras_per_minute = Some(self.bpm * matras_per_pulse);
        self
    }
}

/// Sums both durations of every consecutive interval pair whose counts
/// equal the dominant pair. Overlapping matches each contribute, so an
/// interval shared by two matches is counted twice, and so are its pulses.
pub fn estimate_tempo(bayan: &BayanStrokeSignal, series: &PulseCountSeries, dominant: &DominantPattern) -> Result<TempoEstimate> {
    let intervals = bayan.intervals();
    if intervals.len() != series.len() {
        return Err(TalaError::InvalidSpec(format!(
            "{} bayan intervals but {} pulse counts; the series must come from these strokes",
            intervals.len(),
            series.len()
        )));
    }
    let target = (dominant.pcmax_1, dominant.pcmax_2);
    let mut n = 0u32;
    let mut bayan_dur_s = 0.0;
    for (i, w) in series.counts.windows(2).enumerate() {
        if (w[0], w[1]) == target {
            n += 1;
            bayan_dur_s += intervals[i] + intervals[i + 1];
        }
    }
    if n == 0 || bayan_dur_s <= 0.0 {
        return Err(TalaError::NoMatchingPairs(target.0, target.1));
    }
    let count_pulse = n * (u32::from(target.0) + u32::from(target.1));
    let pulse_dur_s = bayan_dur_s / f64::from(count_pulse);
    Ok(TempoEstimate { bpm: 60.0 / pulse_dur_s, bayan_dur_s, count_pulse, pulse_dur_s, n, matras_per_minute: None })
}
