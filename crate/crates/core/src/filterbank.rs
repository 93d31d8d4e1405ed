//! ERB-spaced filterbank design and bayan-band extraction.
//!
//! The bank is only a design object: centres are spaced uniformly on the
//! Glasberg-Moore ERB-rate scale between 50 Hz and Nyquist, and band `k`
//! spans from the centre of band `k - 1` to the centre of band `k + 1`
//! (half-overlapping bands). With 20 bands at 44.1 kHz the second band is
//! centred near 122 Hz and spans roughly 50-213 Hz, which is the range the
//! bass drum of the tabla occupies. Only that band is ever filtered, using
//! a zero-phase fourth-order Butterworth band-pass with 60-200 Hz edges.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, CANONICAL_RATE_HZ};
use crate::error::{Result, TalaError};

/// Lowest centre frequency of the bank.
pub const BANK_LOW_HZ: f64 = 50.0;
/// Number of bands in the default bank.
pub const DEFAULT_BANDS: usize = 20;
/// Zero-based index of the band that carries the bayan strokes.
pub const BAYAN_BAND_INDEX: usize = 1;
/// Pass-band edges used for the bayan band.
pub const BAYAN_BAND_HZ: (f64, f64) = (60.0, 200.0);

/// ERB-rate (in ERB numbers) of a frequency in Hz.
pub fn erb_rate(f_hz: f64) -> f64 {
    21.4 * (0.00437 * f_hz + 1.0).log10()
}

/// Inverse of [`erb_rate`].
pub fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErbBank {
    pub n_bands: usize,
    pub sample_rate_hz: u32,
    pub center_frequencies_hz: Vec<f64>,
    pub band_edges_hz: Vec<(f64, f64)>,
}

impl ErbBank {
    pub fn band(&self, index: usize) -> Option<(f64, (f64, f64))> {
        Some((*self.center_frequencies_hz.get(index)?, *self.band_edges_hz.get(index)?))
    }
}

/// Designs an `n_bands` ERB bank for the given sample rate.
pub fn design_erb_bank(n_bands: usize, sample_rate_hz: u32) -> Result<ErbBank> {
    if n_bands < 2 {
        return Err(TalaError::InvalidBankSpec(format!("need at least 2 bands, got {n_bands}")));
    }
    if sample_rate_hz < 8_000 {
        return Err(TalaError::InvalidBankSpec(format!(
            "sample rate {sample_rate_hz} Hz is below the 8000 Hz minimum"
        )));
    }
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    let lo = erb_rate(BANK_LOW_HZ);
    let hi = erb_rate(nyquist);
    let step = (hi - lo) / (n_bands - 1) as f64;

    let centers: Vec<f64> = (0..n_bands)
        .map(|k| if k == n_bands - 1 { nyquist } else { erb_rate_to_hz(lo + k as f64 * step) })
        .collect();
    let edges = (0..n_bands)
        .map(|k| {
            let low = if k == 0 { erb_rate_to_hz(lo / 2.0) } else { centers[k - 1] };
            let high = if k + 1 == n_bands { nyquist } else { centers[k + 1] };
            (low, high)
        })
        .collect();
    Ok(ErbBank { n_bands, sample_rate_hz, center_frequencies_hz: centers, band_edges_hz: edges })
}

/// Second-order IIR section, transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// Butterworth-style low-pass (RBJ cookbook).
    pub fn low_pass(cutoff_hz: f64, sample_rate_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 - cos) / 2.0 / a0,
            b1: (1.0 - cos) / a0,
            b2: (1.0 - cos) / 2.0 / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// Butterworth-style high-pass (RBJ cookbook).
    pub fn high_pass(cutoff_hz: f64, sample_rate_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 + cos) / 2.0 / a0,
            b1: -(1.0 + cos) / a0,
            b2: (1.0 + cos) / 2.0 / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// Filters `data` in place starting from zero state.
    pub fn process_in_place(&self, data: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for x in data.iter_mut() {
            let y = self.b0 * *x + z1;
            z1 = self.b1 * *x - self.a1 * y + z2;
            z2 = self.b2 * *x - self.a2 * y;
            *x = y;
        }
    }

    /// Magnitude of the frequency response at `f_hz`.
    pub fn magnitude(&self, f_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * f_hz / sample_rate_hz;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = ((self.b0 + self.b1 * c1 + self.b2 * c2).powi(2) + (self.b1 * s1 + self.b2 * s2).powi(2)).sqrt();
        let den = ((1.0 + self.a1 * c1 + self.a2 * c2).powi(2) + (self.a1 * s1 + self.a2 * s2).powi(2)).sqrt();
        num / den
    }
}

/// Cascade of sections applied forward then backward (zero phase).
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPhaseCascade {
    sections: Vec<Biquad>,
    sample_rate_hz: f64,
}

impl ZeroPhaseCascade {
    pub fn new(sections: Vec<Biquad>, sample_rate_hz: f64) -> Self {
        Self { sections, sample_rate_hz }
    }

    /// Fourth-order band-pass: 2nd-order Butterworth high-pass at `low_hz`
    /// followed by a 2nd-order Butterworth low-pass at `high_hz`.
    pub fn band_pass(low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Self {
        let q = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(
            vec![Biquad::high_pass(low_hz, sample_rate_hz, q), Biquad::low_pass(high_hz, sample_rate_hz, q)],
            sample_rate_hz,
        )
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut data = input.to_vec();
        for s in &self.sections {
            s.process_in_place(&mut data);
        }
        data.reverse();
        for s in &self.sections {
            s.process_in_place(&mut data);
        }
        data.reverse();
        data
    }

    /// Effective magnitude (forward and backward passes) at `f_hz`.
    pub fn magnitude(&self, f_hz: f64) -> f64 {
        self.sections.iter().map(|s| s.magnitude(f_hz, self.sample_rate_hz)).product::<f64>().powi(2)
    }
}

/// Band-pass filters a canonical-rate clip down to the bayan band.
pub fn extract_bayan_band(clip: &AudioClip) -> Result<AudioClip> {
    extract_band(clip, BAYAN_BAND_HZ)
}

/// Like [`extract_bayan_band`] with explicit pass-band edges.
pub fn extract_band(clip: &AudioClip, (low_hz, high_hz): (f64, f64)) -> Result<AudioClip> {
    if clip.sample_rate_hz() != CANONICAL_RATE_HZ {
        return Err(TalaError::WrongSampleRate { expected: CANONICAL_RATE_HZ, actual: clip.sample_rate_hz() });
    }
    let nyquist = f64::from(CANONICAL_RATE_HZ) / 2.0;
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
        return Err(TalaError::InvalidBankSpec(format!("band edges {low_hz}-{high_hz} Hz are not ordered inside (0, {nyquist})")));
    }
    let filter = ZeroPhaseCascade::band_pass(low_hz, high_hz, f64::from(CANONICAL_RATE_HZ));
    Ok(clip.with_samples(filter.apply(clip.samples())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(f: f64, secs: f64) -> AudioClip {
        let n = (secs * 44_100.0) as usize;
        AudioClip::new((0..n).map(|i| (2.0 * PI * f * i as f64 / 44_100.0).sin()).collect(), 44_100).unwrap()
    }

    /// RMS over the clip with 50 ms trimmed from both ends.
    fn inner_rms(x: &[f64]) -> f64 {
        let trim = 2205;
        let inner = &x[trim..x.len() - trim];
        (inner.iter().map(|v| v * v).sum::<f64>() / inner.len() as f64).sqrt()
    }

    #[test]
    fn default_bank_band_two() {
        let bank = design_erb_bank(20, 44_100).unwrap();
        let (center, (low, high)) = bank.band(BAYAN_BAND_INDEX).unwrap();
        assert!((120.0..=140.0).contains(&center), "center {center}");
        assert!((low - 60.0).abs() <= 15.0, "low edge {low}");
        assert!((high - 200.0).abs() <= 15.0, "high edge {high}");
    }

    #[test]
    fn bank_is_ordered_and_inside_nyquist() {
        for (n, rate) in [(2, 8_000), (20, 44_100), (32, 16_000), (7, 48_000)] {
            let bank = design_erb_bank(n, rate).unwrap();
            assert_eq!(bank.center_frequencies_hz.len(), n);
            assert!(bank.center_frequencies_hz.windows(2).all(|w| w[0] < w[1]));
            for &(lo, hi) in &bank.band_edges_hz {
                assert!(lo > 0.0 && lo < hi && hi <= f64::from(rate) / 2.0);
            }
        }
    }

    #[test]
    fn bank_rejects_bad_specs() {
        assert!(matches!(design_erb_bank(1, 44_100), Err(TalaError::InvalidBankSpec(_))));
        assert!(matches!(design_erb_bank(20, 4_000), Err(TalaError::InvalidBankSpec(_))));
    }

    #[test]
    fn erb_rate_round_trips() {
        for f in [20.0, 50.0, 130.0, 1000.0, 22_050.0] {
            assert!((erb_rate_to_hz(erb_rate(f)) - f).abs() < 1e-9 * f.max(1.0));
        }
    }

    #[test]
    fn passes_130_hz() {
        let clip = sine(130.0, 2.0);
        let out = extract_bayan_band(&clip).unwrap();
        let ratio = inner_rms(out.samples()) / inner_rms(clip.samples());
        assert!(ratio >= 0.7, "130 Hz gain {ratio}");
    }

    #[test]
    fn rejects_1000_hz() {
        let clip = sine(1000.0, 2.0);
        let out = extract_bayan_band(&clip).unwrap();
        let ratio = inner_rms(out.samples()) / inner_rms(clip.samples());
        assert!(ratio <= 0.1, "1000 Hz gain {ratio}");
    }

    #[test]
    fn measured_response_agrees_with_design() {
        // Steady-state amplitude measured on the filtered sinusoid is an
        // independent check on the analytic magnitude.
        let filter = ZeroPhaseCascade::band_pass(60.0, 200.0, 44_100.0);
        for f in [30.0, 60.0, 130.0, 200.0, 400.0] {
            let clip = sine(f, 3.0);
            let out = filter.apply(clip.samples());
            let measured = inner_rms(&out) / inner_rms(clip.samples());
            let designed = filter.magnitude(f);
            assert!((measured - designed).abs() < 0.02, "{f} Hz: measured {measured}, designed {designed}");
        }
    }

    #[test]
    fn stop_band_and_edge_gains() {
        let filter = ZeroPhaseCascade::band_pass(60.0, 200.0, 44_100.0);
        let peak = (500..=2000).map(|i| filter.magnitude(i as f64 * 0.1)).fold(0.0, f64::max);
        let db = |f: f64| 20.0 * (filter.magnitude(f) / peak).log10();
        assert!(db(30.0) <= -20.0, "30 Hz at {} dB", db(30.0));
        assert!(db(400.0) <= -20.0, "400 Hz at {} dB", db(400.0));
        for f in [60.0, 200.0] {
            assert!((-9.0..=0.0).contains(&db(f)), "{f} Hz at {} dB", db(f));
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let clip = AudioClip::silence(1.0, 44_100);
        let out = extract_bayan_band(&clip).unwrap();
        assert_eq!(out.len(), clip.len());
        assert!(out.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let clip = AudioClip::silence(1.0, 48_000);
        assert!(matches!(extract_bayan_band(&clip), Err(TalaError::WrongSampleRate { .. })));
    }

    #[test]
    fn linear_in_gain() {
        let clip = AudioClip::new(
            (0..44_100).map(|i| ((i * 7919 % 1013) as f64 / 506.5 - 1.0) * 0.9).collect(),
            44_100,
        )
        .unwrap();
        let a = 0.37;
        let y = extract_bayan_band(&clip).unwrap();
        let ya = extract_bayan_band(&clip.scaled(a)).unwrap();
        let scale = y.samples().iter().fold(0.0f64, |m, v| m.max(v.abs())) * a;
        let err = y.samples().iter().zip(ya.samples()).map(|(u, v)| (a * u - v).abs()).fold(0.0, f64::max);
        assert!(err / scale < 1e-9, "relative error {}", err / scale);
    }
}
