//! Fixtures shared by the benchmarks.

use tala_core::{synthesize, AudioClip, Grammar, SynthSpec};

/// A clean clip of `tala` at `bpm` lasting at least `seconds`.
pub fn clip(tala: &str, bpm: f64, seconds: f64) -> AudioClip {
    let theka = Grammar::builtin().theka(tala).expect("bundled tala").clone();
    let avarts = (seconds * bpm / 60.0 / theka.pulses_per_avart() as f64).ceil() as u32;
    synthesize(&SynthSpec::clean(theka, bpm, avarts.max(1))).expect("valid spec").0
}

#[cfg(test)]
mod tests {
    #[test]
    fn clip_is_long_enough() {
        assert!(super::clip("rupak", 300.0, 10.0).duration_s() >= 10.0);
    }
}
