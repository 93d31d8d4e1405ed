//! Differential amplitude envelope and contrast-based peak picking.

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Result, TalaError};

/// Envelope frame rate in Hz (5 ms frames).
pub const FRAME_RATE_HZ: f64 = 200.0;
/// Cut-off of the smoothing low-pass applied to the rectified signal.
pub const SMOOTHING_CUTOFF_HZ: f64 = 10.0;
/// Shortest clip the envelope stage accepts.
pub const MIN_CLIP_S: f64 = 0.5;
/// Default peak-contrast fraction.
pub const DEFAULT_CONTRAST: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    pub frame_rate_hz: f64,
    pub smoothing_cutoff_hz: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self { frame_rate_hz: FRAME_RATE_HZ, smoothing_cutoff_hz: SMOOTHING_CUTOFF_HZ }
    }
}

/// Half-wave rectified first difference of the smoothed amplitude envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub values: Vec<f64>,
    pub frame_rate_hz: f64,
    pub source_duration_s: f64,
}

impl Envelope {
    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 / self.frame_rate_hz
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * gain).collect(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePeak {
    pub time_s: f64,
    pub amplitude: f64,
}

/// Time-ordered percussive peaks extracted from one envelope.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakSignal {
    pub peaks: Vec<EnvelopePeak>,
    /// Global maximum of the envelope the peaks came from.
    pub l_max: f64,
    /// Contrast fraction used when picking.
    pub d_f: f64,
}

impl PeakSignal {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.time_s).collect()
    }
}

/// Envelope with the default parameters.
pub fn compute_envelope(clip: &AudioClip) -> Result<Envelope> {
    compute_envelope_with(clip, &EnvelopeParams::default())
}

/// Full-wave rectify, low-pass, decimate to the frame rate, differentiate
/// and half-wave rectify.
///
/// The smoother is causal, so the rising edge of a stroke stays at its
/// onset rather than before it. It is critically damped, so a single
/// stroke never rebounds into a second rise.
pub fn compute_envelope_with(clip: &AudioClip, params: &EnvelopeParams) -> Result<Envelope> {
    let duration_s = clip.duration_s();
    if duration_s < MIN_CLIP_S {
        return Err(TalaError::ClipTooShort { duration_s, min_s: MIN_CLIP_S });
    }
    let rate = f64::from(clip.sample_rate_hz());
    if !(params.frame_rate_hz > 0.0 && params.frame_rate_hz <= rate) {
        return Err(TalaError::InvalidClip(format!("frame rate {} Hz is not usable at {rate} Hz", params.frame_rate_hz)));
    }

    let mut smooth: Vec<f64> = clip.samples().iter().map(|s| s.abs()).collect();
    smooth_in_place(&mut smooth, params.smoothing_cutoff_hz, rate);

    let hop = rate / params.frame_rate_hz;
    let n_frames = (smooth.len() as f64 / hop).floor() as usize;
    let mut values = Vec::with_capacity(n_frames);
    let mut prev: Option<f64> = None;
    for frame in 0..n_frames {
        let idx = ((frame as f64 * hop).round() as usize).min(smooth.len() - 1);
        let level = smooth[idx];
        let diff: f64 = prev.map_or(0.0, |p| level - p);
        values.push(diff.max(0.0));
        prev = Some(level);
    }
    Ok(Envelope { values, frame_rate_hz: params.frame_rate_hz, source_duration_s: duration_s })
}

/// Two identical one-pole low-pass sections whose cascade is 3 dB down at
/// `cutoff_hz`. Each section starts settled on the first sample, so a
/// constant input passes through unchanged.
fn smooth_in_place(data: &mut [f64], cutoff_hz: f64, rate: f64) {
    let pole_hz = cutoff_hz / (std::f64::consts::SQRT_2 - 1.0).sqrt();
    let gain = 1.0 - (-2.0 * std::f64::consts::PI * pole_hz / rate).exp();
    for _ in 0..2 {
        let Some(&first) = data.first() else { return };
        let mut y = first;
        for x in data.iter_mut() {
            y += gain * (*x - y);
            *x = y;
        }
    }
}

/// Picks local maxima whose contrast against the neighbouring minima on
/// both sides exceeds `d_f * l_max`.
///
/// Maxima separated by a dip shallower than the contrast are one peak,
/// reported at its first highest frame.
pub fn pick_peaks(env: &Envelope, d_f: f64) -> PeakSignal {
    let l_max = env.values.iter().copied().fold(0.0, f64::max);
    let mut out = PeakSignal { peaks: Vec::new(), l_max, d_f };
    if l_max <= 0.0 || env.values.is_empty() {
        return out;
    }
    let delta = d_f * l_max;

    // Alternates between waiting for a rise of more than `delta` above the
    // running minimum and waiting for a fall of more than `delta` below the
    // running maximum.
    let mut rising = true;
    let mut low = env.values[0];
    let (mut high, mut high_at) = (f64::NEG_INFINITY, 0);
    for (i, &v) in env.values.iter().enumerate() {
        if rising {
            if v < low {
                low = v;
            }
            if v - low > delta {
                rising = false;
                high = v;
                high_at = i;
            }
        } else {
            if v > high {
                high = v;
                high_at = i;
            }
            if high - v > delta {
                out.peaks.push(EnvelopePeak { time_s: env.time_of(high_at), amplitude: high });
                rising = true;
                low = v;
            }
        }
    }
    out
}
