//! Labelled synthetic theka renderings for testing and evaluation.
//!
//! Every pulse position gets one decaying tone burst. Bols with a bayan
//! component sound at 130 Hz, inside the bayan band; dayan-only bols and
//! rests sound at 600 Hz, well above it. Stressed bayan strokes are louder
//! than unstressed ones so that the mean-plus-deviation threshold keeps
//! only the stresses.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::audio::{write_wav_pcm16, AudioClip, CANONICAL_RATE_HZ};
use crate::error::{Result, TalaError};
use crate::grammar::Theka;

pub const BAYAN_TONE_HZ: f64 = 130.0;
pub const DAYAN_TONE_HZ: f64 = 600.0;
/// Exponential decay time constant of every burst.
pub const DECAY_S: f64 = 0.08;

pub const STRESSED_AMPLITUDE: f64 = 1.0;
/// Level of every sounded stroke that is not a stress, bayan or dayan.
pub const UNSTRESSED_AMPLITUDE: f64 = 0.55;
pub const REST_AMPLITUDE: f64 = 0.4;
/// Share of a dayan or rest burst that also sounds at the bayan tone, as the
/// bass drum head resonates slightly under every stroke.
pub const BAYAN_BLEED: f64 = 0.05;

const ATTACK_S: f64 = 0.002;
const LEAD_IN_S: f64 = 0.25;
const TAIL_S: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub theka: Theka,
    /// Pulses per minute.
    pub tempo_bpm: f64,
    pub n_avarts: u32,
    pub timing_jitter_s: f64,
    pub amplitude_jitter: f64,
    /// RMS of the added white noise.
    pub noise_floor: f64,
    /// Chance that each optional bayan bol is stressed in a given avart.
    pub optional_stress_probability: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Clean rendering: no jitter, no noise, mandatory stresses only.
    pub fn clean(theka: Theka, tempo_bpm: f64, n_avarts: u32) -> Self {
        Self {
            theka,
            tempo_bpm,
            n_avarts,
            timing_jitter_s: 0.0,
            amplitude_jitter: 0.0,
            noise_floor: 0.0,
            optional_stress_probability: 0.0,
            seed: 0,
        }
    }

    pub fn pulse_period_s(&self) -> f64 {
        60.0 / self.tempo_bpm
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TalaError::InvalidSpec(m));
        self.theka.validate().map_err(|e| TalaError::InvalidSpec(e.to_string()))?;
        if !(self.tempo_bpm.is_finite() && self.tempo_bpm > 0.0) {
            return bad(format!("tempo must be positive, got {}", self.tempo_bpm));
        }
        if self.n_avarts == 0 {
            return bad("at least one avart is required".into());
        }
        if !(self.timing_jitter_s.is_finite() && self.timing_jitter_s >= 0.0) {
            return bad(format!("timing jitter must be non-negative, got {}", self.timing_jitter_s));
        }
        if self.pulse_period_s() <= 2.0 * self.timing_jitter_s {
            return bad(format!(
                "timing jitter {} s could reorder strokes spaced {:.4} s apart",
                self.timing_jitter_s,
                self.pulse_period_s()
            ));
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter) {
            return bad(format!("amplitude jitter must lie in [0, 1), got {}", self.amplitude_jitter));
        }
        if !(0.0..1.0).contains(&self.noise_floor) {
            return bad(format!("noise floor must lie in [0, 1), got {}", self.noise_floor));
        }
        if !(0.0..=1.0).contains(&self.optional_stress_probability) {
            return bad(format!("stress probability must lie in [0, 1], got {}", self.optional_stress_probability));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tala_name: String,
    pub tempo_bpm: f64,
    pub matras_per_minute: f64,
    pub pulses_per_avart: usize,
    pub n_avarts: u32,
    /// Onset of every stroke, rests included, strictly increasing.
    pub stroke_times_s: Vec<f64>,
    pub bols: Vec<String>,
    /// Stroke indices rendered as stressed bayan strokes.
    pub stressed_positions: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct Burst {
    onset_s: f64,
    bayan: f64,
    dayan: f64,
}

fn add_burst(out: &mut [f64], rate: f64, onset_s: f64, freq_hz: f64, amplitude: f64) {
    if amplitude == 0.0 {
        return;
    }
    let start = (onset_s * rate).round().max(0.0) as usize;
    let len = ((DECAY_S * 8.0) * rate) as usize;
    let attack = ATTACK_S * rate;
    let w = std::f64::consts::TAU * freq_hz / rate;
    for (k, slot) in out.iter_mut().skip(start).take(len).enumerate() {
        let kf = k as f64;
        let ramp = if kf < attack { 0.5 - 0.5 * (std::f64::consts::PI * kf / attack).cos() } else { 1.0 };
        *slot += amplitude * ramp * (-kf / rate / DECAY_S).exp() * (w * kf).sin();
    }
}

/// Renders `spec` at 44.1 kHz. Identical specs give bit-identical clips.
pub fn synthesize(spec: &SynthSpec) -> Result<(AudioClip, GroundTruth)> {
    spec.validate()?;
    let theka = &spec.theka;
    let p = theka.pulses_per_avart();
    let period = spec.pulse_period_s();
    let optional = theka.optional_positions();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let total = p * spec.n_avarts as usize;
    let mut bursts = Vec::with_capacity(total);
    let mut times = Vec::with_capacity(total);
    let mut bols = Vec::with_capacity(total);
    let mut stressed_positions = Vec::new();

    for avart in 0..spec.n_avarts as usize {
        let stressed_here: Vec<bool> = (0..p)
            .map(|i| {
                theka.bols[i].mandatory_stressed
                    || (optional.contains(&i) && spec.optional_stress_probability > 0.0 && rng.random_bool(spec.optional_stress_probability))
            })
            .collect();
        for (i, bol) in theka.bols.iter().enumerate() {
            let idx = avart * p + i;
            let jitter = if spec.timing_jitter_s > 0.0 { rng.random_range(-spec.timing_jitter_s..=spec.timing_jitter_s) } else { 0.0 };
            let gain = if spec.amplitude_jitter > 0.0 { 1.0 + rng.random_range(-spec.amplitude_jitter..=spec.amplitude_jitter) } else { 1.0 };
            let onset_s = LEAD_IN_S + idx as f64 * period + jitter;
            let burst = if bol.is_rest {
                Burst { onset_s, bayan: REST_AMPLITUDE * BAYAN_BLEED, dayan: REST_AMPLITUDE }
            } else if bol.has_bayan {
                let level = if stressed_here[i] { STRESSED_AMPLITUDE } else { UNSTRESSED_AMPLITUDE };
                if stressed_here[i] {
                    stressed_positions.push(idx);
                }
                Burst { onset_s, bayan: level, dayan: 0.0 }
            } else {
                Burst { onset_s, bayan: UNSTRESSED_AMPLITUDE * BAYAN_BLEED, dayan: UNSTRESSED_AMPLITUDE }
            };
            bursts.push(Burst { bayan: burst.bayan * gain, dayan: burst.dayan * gain, ..burst });
            times.push(onset_s);
            bols.push(bol.name.clone());
        }
    }

    let rate = f64::from(CANONICAL_RATE_HZ);
    let duration_s = LEAD_IN_S + total as f64 * period + TAIL_S;
    let mut samples = vec![0.0; (duration_s * rate).ceil() as usize];
    for b in &bursts {
        add_burst(&mut samples, rate, b.onset_s, BAYAN_TONE_HZ, b.bayan);
        add_burst(&mut samples, rate, b.onset_s, DAYAN_TONE_HZ, b.dayan);
    }
    if spec.noise_floor > 0.0 {
        let normal = Normal::new(0.0, spec.noise_floor).map_err(|e| TalaError::InvalidSpec(e.to_string()))?;
        for s in &mut samples {
            *s += normal.sample(&mut rng);
        }
    }
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 1.0 {
        samples.iter_mut().for_each(|s| *s /= peak);
    }

    let truth = GroundTruth {
        tala_name: theka.tala_name.clone(),
        tempo_bpm: spec.tempo_bpm,
        matras_per_minute: spec.tempo_bpm * theka.matras_per_pulse(),
        pulses_per_avart: p,
        n_avarts: spec.n_avarts,
        stroke_times_s: times,
        bols,
        stressed_positions,
        seed: spec.seed,
    };
    Ok((AudioClip::new(samples, CANONICAL_RATE_HZ)?, truth))
}

/// Tempo ranges, in pulses per minute, typical of each tala in
/// performance.
pub fn default_bpm_range(tala: &str) -> Option<(f64, f64)> {
    match tala {
        "dadra" => Some((140.0, 320.0)),
        "kaharba" => Some((220.0, 400.0)),
        "bhajani" => Some((300.0, 360.0)),
        "rupak" => Some((240.0, 375.0)),
        _ => None,
    }
}

/// Perturbations applied to every clip of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Degradation {
    pub timing_jitter_s: f64,
    pub amplitude_jitter: f64,
    pub noise_floor: f64,
    pub optional_stress_probability: f64,
}

/// `count` specs with tempi drawn uniformly from `bpm_range` and enough
/// avarts to last about `duration_s`. Each clip gets its own seed derived
/// from `seed`.
pub fn corpus_specs(theka: &Theka, count: usize, bpm_range: (f64, f64), duration_s: f64, degradation: Degradation, seed: u64) -> Vec<SynthSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = bpm_range;
    (0..count)
        .map(|_| {
            let tempo_bpm = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let pulses = duration_s * tempo_bpm / 60.0;
            let n_avarts = (pulses / theka.pulses_per_avart() as f64).ceil().max(1.0) as u32;
            SynthSpec {
                theka: theka.clone(),
                tempo_bpm,
                n_avarts,
                timing_jitter_s: degradation.timing_jitter_s,
                amplitude_jitter: degradation.amplitude_jitter,
                noise_floor: degradation.noise_floor,
                optional_stress_probability: degradation.optional_stress_probability,
                seed: rng.random(),
            }
        })
        .collect()
}

/// `clip.wav` -> `clip.truth.json`.
pub fn truth_path_for(wav_path: &Path) -> PathBuf {
    wav_path.with_extension("truth.json")
}

/// Writes the clip as 16-bit PCM and the ground truth next to it.
pub fn write_synth(clip: &AudioClip, truth: &GroundTruth, wav_path: &Path) -> Result<PathBuf> {
    write_wav_pcm16(clip, wav_path)?;
    let truth_path = truth_path_for(wav_path);
    let json = serde_json::to_string_pretty(truth)?;
    std::fs::write(&truth_path, json).map_err(|source| TalaError::Io { path: truth_path.clone(), source })?;
    Ok(truth_path)
}
