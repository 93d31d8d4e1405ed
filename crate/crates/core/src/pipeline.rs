//! End-to-end detection: audio in, [`AnalysisReport`] out.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::audio::{canonicalize, AudioClip, CANONICAL_RATE_HZ};
use crate::cooccurrence::{build_matrix, count_pulses_with, dominant_pattern, CooccurrenceMatrix, DominantPattern, ALIGNMENT_EPS_S};
use crate::envelope::{compute_envelope_with, pick_peaks, EnvelopeParams, DEFAULT_CONTRAST};
use crate::error::{Result, TalaError};
use crate::filterbank::{extract_band, BAYAN_BAND_HZ};
use crate::grammar::{classify, classify_with_matrix, Grammar, TalaDetection, TalaPatterns};
use crate::strokes::{refine, refine_strokes, threshold_bayan_peaks, DEFAULT_WINDOW_S};
use crate::tempo::{estimate_tempo, TempoEstimate};

pub const SCHEMA_VERSION: u32 = 1;
/// Shortest clip that can hold three bayan strokes at usual tempi.
pub const MIN_ANALYSIS_S: f64 = 5.0;

/// How talas matching the dominant pair at the same stage and provenance
/// are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateRanking {
    /// Grammar file order.
    GrammarOrder,
    /// Matrix transitions covered by each tala's pattern set, then grammar
    /// order.
    #[default]
    MatrixSupport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Peak contrast as a fraction of the envelope maximum.
    pub d_f: f64,
    /// Refinement window in seconds.
    pub window_s: f64,
    pub band_hz: (f64, f64),
    /// Stroke/peak alignment slack when counting pulses.
    pub eps_s: f64,
    pub envelope: EnvelopeParams,
    #[serde(default)]
    pub ranking: CandidateRanking,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            d_f: DEFAULT_CONTRAST,
            window_s: DEFAULT_WINDOW_S,
            band_hz: BAYAN_BAND_HZ,
            eps_s: ALIGNMENT_EPS_S,
            envelope: EnvelopeParams::default(),
            ranking: CandidateRanking::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band_hz;
        if !(lo > 0.0 && hi > lo && hi < f64::from(CANONICAL_RATE_HZ) / 2.0) {
            return Err(TalaError::InvalidBankSpec(format!("band edges {lo}..{hi} Hz")));
        }
        if !(self.d_f >= 0.0 && self.d_f < 1.0) {
            return Err(TalaError::InvalidSpec(format!("d_f must lie in [0, 1), got {}", self.d_f)));
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(TalaError::InvalidSpec(format!("window must be positive, got {}", self.window_s)));
        }
        if !(self.eps_s >= 0.0 && self.eps_s.is_finite()) {
            return Err(TalaError::InvalidSpec(format!("alignment slack must be non-negative, got {}", self.eps_s)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notice {
    pub code: String,
    pub message: String,
}

impl Notice {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_owned(), message: message.into() }
    }

    fn from_error(e: &TalaError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub mu_bp: f64,
    pub sigma_bp: f64,
    pub threshold: f64,
    pub fallback_used: bool,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub input: Option<String>,
    pub duration_s: f64,
    pub detection: TalaDetection,
    pub dominant: Option<DominantPattern>,
    pub tempo: Option<TempoEstimate>,
    pub matrix: Option<CooccurrenceMatrix>,
    pub pulse_counts: Vec<u8>,
    pub bayan_threshold: Option<ThresholdSummary>,
    pub bayan_stroke_times_s: Vec<f64>,
    pub peak_times_s: Vec<f64>,
    pub warnings: Vec<Notice>,
    pub timings: Vec<StageTiming>,
    /// Set when a stage failed and the detection degraded to none.
    pub error: Option<Notice>,
}

impl AnalysisReport {
    fn empty(input: Option<String>, duration_s: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            input,
            duration_s,
            detection: TalaDetection::undetermined(),
            dominant: None,
            tempo: None,
            matrix: None,
            pulse_counts: Vec::new(),
            bayan_threshold: None,
            bayan_stroke_times_s: Vec::new(),
            peak_times_s: Vec::new(),
            warnings: Vec::new(),
            timings: Vec::new(),
            error: None,
        }
    }

    pub fn tala_name(&self) -> Option<&str> {
        self.detection.tala_name.as_deref()
    }

    pub fn bpm(&self) -> Option<f64> {
        self.tempo.map(|t| t.bpm)
    }

    pub fn total_ms(&self) -> f64 {
        self.timings.iter().map(|t| t.ms).sum()
    }
}

/// A configured analyser. Pattern sets are derived once and reused.
#[derive(Debug, Clone)]
pub struct Detector {
    config: PipelineConfig,
    grammar: Grammar,
    patterns: Vec<TalaPatterns>,
}

impl Default for Detector {
    fn default() -> Self {
        Self::new(PipelineConfig::default(), Grammar::builtin()).expect("default configuration is valid")
    }
}

struct Timer<'a> {
    timings: &'a mut Vec<StageTiming>,
    start: Instant,
}

impl Timer<'_> {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming { stage: stage.to_owned(), ms: (now - self.start).as_secs_f64() * 1e3 });
        self.start = now;
    }
}

impl Detector {
    pub fn new(config: PipelineConfig, grammar: Grammar) -> Result<Self> {
        config.validate()?;
        grammar.validate()?;
        let patterns = grammar.patterns();
        Ok(Self { config, grammar, patterns })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    /// Runs every stage. Never fails: a stage error leaves the detection at
    /// none and is recorded in `error` and `warnings`.
    pub fn detect(&self, clip: &AudioClip, input: Option<String>) -> AnalysisReport {
        let mut report = AnalysisReport::empty(input, clip.duration_s());
        if let Err(e) = self.run(clip, &mut report) {
            report.warnings.push(Notice::from_error(&e));
            report.error = Some(Notice::from_error(&e));
            report.detection = match report.dominant {
                Some(d) => TalaDetection::none((d.pcmax_1, d.pcmax_2)),
                None => TalaDetection::undetermined(),
            };
        }
        report
    }

    fn run(&self, clip: &AudioClip, report: &mut AnalysisReport) -> Result<()> {
        let cfg = &self.config;
        let mut timings = Vec::new();
        let result = self.run_stages(clip, report, &mut Timer { timings: &mut timings, start: Instant::now() }, cfg);
        report.timings = timings;
        result
    }

    fn run_stages(&self, clip: &AudioClip, report: &mut AnalysisReport, timer: &mut Timer<'_>, cfg: &PipelineConfig) -> Result<()> {
        if clip.duration_s() < MIN_ANALYSIS_S {
            return Err(TalaError::ClipTooShort { duration_s: clip.duration_s(), min_s: MIN_ANALYSIS_S });
        }
        if clip.sample_rate_hz() != CANONICAL_RATE_HZ {
            report.warnings.push(Notice::new("Resampled", format!("resampled from {} Hz to {CANONICAL_RATE_HZ} Hz", clip.sample_rate_hz())));
        }
        let clip = canonicalize(clip)?;
        timer.lap("canonicalize");

        let band = extract_band(&clip, cfg.band_hz)?;
        timer.lap("bayan_band");

        let (band_env, full_env) =
            rayon::join(|| compute_envelope_with(&band, &cfg.envelope), || compute_envelope_with(&clip, &cfg.envelope));
        let (band_env, full_env) = (band_env?, full_env?);
        timer.lap("envelopes");

        let band_peaks = pick_peaks(&band_env, cfg.d_f);
        let full_peaks = refine(&pick_peaks(&full_env, cfg.d_f), cfg.window_s);
        report.peak_times_s = full_peaks.times();
        timer.lap("peaks");

        let bayan = threshold_bayan_peaks(&band_peaks)?;
        report.bayan_threshold = Some(ThresholdSummary {
            mu_bp: bayan.mu_bp,
            sigma_bp: bayan.sigma_bp,
            threshold: bayan.threshold,
            fallback_used: bayan.fallback_used,
            candidates: band_peaks.len(),
        });
        if bayan.fallback_used {
            report.warnings.push(Notice::new("ThresholdFallback", "fewer than 3 strokes above mean + deviation; kept strokes at or above the mean"));
        }
        let bayan = refine_strokes(&bayan, cfg.window_s);
        report.bayan_stroke_times_s = bayan.times();
        timer.lap("bayan_strokes");

        let series = count_pulses_with(&full_peaks, &bayan, cfg.eps_s)?;
        report.pulse_counts = series.counts.clone();
        if !series.clamped_high.is_empty() {
            report.warnings.push(Notice::new("PulseCountClamped", format!("{} interval(s) held more than 16 pulses", series.clamped_high.len())));
        }
        if !series.raised_empty.is_empty() {
            report.warnings.push(Notice::new("EmptyInterval", format!("{} interval(s) held no peak and were counted as 1", series.raised_empty.len())));
        }
        let matrix = build_matrix(&series)?;
        let dominant = dominant_pattern(&matrix)?;
        report.dominant = Some(dominant);
        timer.lap("cooccurrence");

        let detection = match cfg.ranking {
            CandidateRanking::GrammarOrder => classify(&dominant, &self.patterns),
            CandidateRanking::MatrixSupport => classify_with_matrix(&dominant, &matrix, &self.patterns),
        };
        report.matrix = Some(matrix);
        if detection.is_none() {
            report.warnings.push(Notice::new("NoTalaMatch", format!("pair ({}, {}) matches no tala", dominant.pcmax_1, dominant.pcmax_2)));
        } else if !detection.exact {
            report.warnings.push(Notice::new("ToleranceMatch", "matched with the +-1 pulse tolerance"));
        }
        let ratio = detection.tala_name.as_deref().and_then(|n| self.grammar.theka(n)).map(|t| t.matras_per_pulse());
        report.detection = detection;
        timer.lap("classify");

        match estimate_tempo(&bayan, &series, &dominant) {
            Ok(t) => report.tempo = Some(ratio.map_or(t, |r| t.with_matra_ratio(r))),
            Err(e) => report.warnings.push(Notice::from_error(&e)),
        }
        timer.lap("tempo");
        Ok(())
    }
}

/// [`Detector::detect`] with the default configuration and bundled grammar.
pub fn detect(clip: &AudioClip, config: &PipelineConfig) -> AnalysisReport {
    match Detector::new(config.clone(), Grammar::builtin()) {
        Ok(d) => d.detect(clip, None),
        Err(e) => {
            let mut r = AnalysisReport::empty(None, clip.duration_s());
            r.warnings.push(Notice::from_error(&e));
            r.error = Some(Notice::from_error(&e));
            r
        }
    }
}
