//! Tala and tempo detection for tabla recordings.
//!
//! The chain runs: canonical 44.1 kHz mono audio, a 60-200 Hz bayan band,
//! differential envelopes of the band and of the full signal, contrast peak
//! picking, a mean-plus-deviation cut that keeps the stressed bayan strokes,
//! pulse counts between consecutive strokes, a 16x16 co-occurrence matrix
//! of consecutive counts, and finally a grammar lookup of the dominant pair
//! plus a tempo estimate from the intervals that realise it.
//!
//! ```no_run
//! use tala_core::{load_clip, Detector};
//!
//! let clip = load_clip("clip.wav").unwrap();
//! let report = Detector::default().detect(&clip, Some("clip.wav".into()));
//! println!("{:?} at {:?} BPM", report.tala_name(), report.bpm());
//! ```

pub mod audio;
pub mod cooccurrence;
pub mod envelope;
pub mod error;
pub mod eval;
pub mod filterbank;
pub mod grammar;
pub mod pipeline;
pub mod strokes;
pub mod synth;
pub mod tempo;

pub use audio::{canonicalize, load_clip, resample, write_wav_pcm16, AudioClip, CANONICAL_RATE_HZ};
pub use cooccurrence::{build_matrix, count_pulses, dominant_pattern, CooccurrenceMatrix, DominantPattern, PulseCountSeries};
pub use envelope::{compute_envelope, pick_peaks, Envelope, EnvelopeParams, EnvelopePeak, PeakSignal};
pub use error::{Result, TalaError};
pub use eval::{evaluate, read_manifest, summarize, AnnotationRecord, ClipOutcome, EvalSummary};
pub use filterbank::{design_erb_bank, extract_bayan_band, ErbBank};
pub use grammar::{basic_patterns, classify, classify_with_matrix, extended_patterns, Grammar, PulsePattern, TalaDetection, TalaPatterns, Theka};
pub use pipeline::{detect, AnalysisReport, CandidateRanking, Detector, PipelineConfig};
pub use strokes::{refine, threshold_bayan_peaks, BayanStrokeSignal};
pub use synth::{corpus_specs, synthesize, write_synth, Degradation, GroundTruth, SynthSpec};
pub use tempo::{estimate_tempo, TempoEstimate};
