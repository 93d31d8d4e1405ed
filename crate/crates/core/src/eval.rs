//! Batch evaluation against an annotated manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::load_clip;
use crate::error::{Result, TalaError};
use crate::pipeline::Detector;

/// Relative tempo error accepted as correct.
pub const TEMPO_TOLERANCE: f64 = 0.05;
pub const UNKNOWN_TALA: &str = "unknown";
pub const NONE_LABEL: &str = "none";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub path: PathBuf,
    #[serde(rename = "tala")]
    pub tala_name: String,
    pub tempo_bpm: f64,
}

/// Reads a `path,tala,tempo_bpm` CSV. Relative paths are resolved against
/// the manifest's directory; talas must be in `known` or be `unknown`.
pub fn read_manifest(path: &Path, known: &[String]) -> Result<Vec<AnnotationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|source| TalaError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest(&text, base, known)
}

pub fn parse_manifest(text: &str, base: &Path, known: &[String]) -> Result<Vec<AnnotationRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| TalaError::MalformedManifest(e.to_string()))?.clone();
    let expected = ["path", "tala", "tempo_bpm"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(TalaError::MalformedManifest(format!("header must be `path,tala,tempo_bpm`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<AnnotationRecord>().enumerate() {
        let line = i + 2;
        let mut rec = row.map_err(|e| TalaError::MalformedManifest(format!("line {line}: {e}")))?;
        if !(rec.tempo_bpm.is_finite() && rec.tempo_bpm > 0.0) {
            return Err(TalaError::MalformedManifest(format!("line {line}: tempo must be positive")));
        }
        if rec.tala_name != UNKNOWN_TALA && !known.contains(&rec.tala_name) {
            return Err(TalaError::MalformedManifest(format!("line {line}: unknown tala `{}`", rec.tala_name)));
        }
        if rec.path.is_relative() {
            rec.path = base.join(&rec.path);
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(TalaError::MalformedManifest("manifest lists no clips".into()));
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, records: &[AnnotationRecord]) -> Result<()> {
    let io = |e: csv::Error| TalaError::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in records {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|source| TalaError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipOutcome {
    pub path: PathBuf,
    pub truth_tala: String,
    pub truth_bpm: f64,
    pub predicted: Option<String>,
    /// Ranked candidate talas.
    pub candidates: Vec<String>,
    pub bpm: Option<f64>,
    pub error: Option<String>,
}

impl ClipOutcome {
    pub fn tala_correct(&self) -> bool {
        self.predicted.as_deref() == Some(self.truth_tala.as_str())
    }

    /// 1 for a top-1 hit, 0.5 when the truth is the runner-up, else 0.
    pub fn ranked_credit(&self) -> f64 {
        match self.candidates.iter().position(|c| *c == self.truth_tala) {
            Some(0) => 1.0,
            Some(1) => 0.5,
            _ => 0.0,
        }
    }

    pub fn tempo_correct(&self) -> bool {
        self.bpm.is_some_and(|b| (b - self.truth_bpm).abs() / self.truth_bpm <= TEMPO_TOLERANCE)
    }
}

/// Analyses every clip on `workers` threads. Outcomes keep manifest order.
pub fn evaluate(records: &[AnnotationRecord], detector: &Detector, workers: usize) -> Result<Vec<ClipOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| TalaError::InvalidSpec(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| records.par_iter().map(|r| evaluate_one(r, detector)).collect()))
}

fn evaluate_one(rec: &AnnotationRecord, detector: &Detector) -> ClipOutcome {
    let mut out = ClipOutcome {
        path: rec.path.clone(),
        truth_tala: rec.tala_name.clone(),
        truth_bpm: rec.tempo_bpm,
        predicted: None,
        candidates: Vec::new(),
        bpm: None,
        error: None,
    };
    match load_clip(&rec.path) {
        Ok(clip) => {
            let report = detector.detect(&clip, Some(rec.path.display().to_string()));
            out.predicted = report.detection.tala_name.clone();
            out.candidates = report.detection.candidates.iter().map(|c| c.tala_name.clone()).collect();
            out.bpm = report.bpm();
            out.error = report.error.map(|e| e.code);
        }
        Err(e) => out.error = Some(e.code().to_owned()),
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Truth talas, in grammar order, that have at least one clip.
    pub rows: Vec<String>,
    /// Predicted labels: every detectable tala, then `none`.
    pub columns: Vec<String>,
    pub counts: Vec<Vec<u32>>,
    /// Row-normalised percentages.
    pub percent: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TalaScore {
    pub tala: String,
    pub clips: u32,
    pub tala_accuracy_pct: f64,
    /// Top-2 ranked credit, a runner-up hit scoring half.
    pub ranked_accuracy_pct: f64,
    pub tempo_correct: u32,
    pub tempo_accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub clips: usize,
    pub confusion: ConfusionMatrix,
    pub per_tala: Vec<TalaScore>,
    /// Fraction of all clips with the tala detected, in percent.
    pub matra_detection_pct: f64,
    pub tempo_detection_pct: f64,
    pub failures: usize,
}

fn pct(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        100.0 * num / den
    } else {
        0.0
    }
}

/// `talas` fixes row and column order.
pub fn summarize(outcomes: &[ClipOutcome], talas: &[String]) -> EvalSummary {
    let mut columns: Vec<String> = talas.to_vec();
    columns.push(NONE_LABEL.to_owned());
    let mut by_truth: BTreeMap<&str, Vec<&ClipOutcome>> = BTreeMap::new();
    for o in outcomes {
        by_truth.entry(o.truth_tala.as_str()).or_default().push(o);
    }
    // Listed talas first, then any other truth label alphabetically.
    let mut rows: Vec<String> = talas.iter().filter(|t| by_truth.contains_key(t.as_str())).cloned().collect();
    rows.extend(by_truth.keys().filter(|k| !talas.iter().any(|t| t == *k)).map(|k| k.to_string()));

    let mut counts = Vec::new();
    let mut percent = Vec::new();
    let mut per_tala = Vec::new();
    for row in &rows {
        let clips = &by_truth[row.as_str()];
        let mut c = vec![0u32; columns.len()];
        for o in clips {
            let label = o.predicted.as_deref().unwrap_or(NONE_LABEL);
            let col = columns.iter().position(|x| x == label).unwrap_or(columns.len() - 1);
            c[col] += 1;
        }
        let n = clips.len() as f64;
        percent.push(c.iter().map(|&v| pct(f64::from(v), n)).collect());
        counts.push(c);
        let tempo_correct = clips.iter().filter(|o| o.tempo_correct()).count() as u32;
        per_tala.push(TalaScore {
            tala: row.clone(),
            clips: clips.len() as u32,
            tala_accuracy_pct: pct(clips.iter().filter(|o| o.tala_correct()).count() as f64, n),
            ranked_accuracy_pct: pct(clips.iter().map(|o| o.ranked_credit()).sum(), n),
            tempo_correct,
            tempo_accuracy_pct: pct(f64::from(tempo_correct), n),
        });
    }
    let total = outcomes.len() as f64;
    EvalSummary {
        clips: outcomes.len(),
        confusion: ConfusionMatrix { rows, columns, counts, percent },
        per_tala,
        matra_detection_pct: pct(outcomes.iter().filter(|o| o.tala_correct()).count() as f64, total),
        tempo_detection_pct: pct(outcomes.iter().filter(|o| o.tempo_correct()).count() as f64, total),
        failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
    }
}

impl EvalSummary {
    /// Plain-text rendering of the confusion matrix, tempo table and totals.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let cm = &self.confusion;
        let w = cm.columns.iter().chain(&cm.rows).map(|c| c.len()).max().unwrap_or(4).max(7) + 2;
        let _ = writeln!(s, "Tala confusion (% of clips per row)");
        let _ = write!(s, "{:<w$}", "truth");
        for c in &cm.columns {
            let _ = write!(s, "{c:>w$}");
        }
        s.push('\n');
        for (r, row) in cm.rows.iter().enumerate() {
            let _ = write!(s, "{row:<w$}");
            for v in &cm.percent[r] {
                let _ = write!(s, "{:>w$.2}", v);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "\nTempo detection (within +-{:.0}%)", TEMPO_TOLERANCE * 100.0);
        let _ = writeln!(s, "{:<w$}{:>8}{:>10}{:>12}{:>14}", "tala", "clips", "correct", "tempo %", "top-2 tala %");
        for t in &self.per_tala {
            let _ = writeln!(s, "{:<w$}{:>8}{:>10}{:>12.2}{:>14.2}", t.tala, t.clips, t.tempo_correct, t.tempo_accuracy_pct, t.ranked_accuracy_pct);
        }
        let _ = writeln!(s, "\nMatra detection: {:.2}%", self.matra_detection_pct);
        let _ = writeln!(s, "Tempo detection: {:.2}%", self.tempo_detection_pct);
        if self.failures > 0 {
            let _ = writeln!(s, "Clips with analysis errors: {}", self.failures);
        }
        s
    }
}
