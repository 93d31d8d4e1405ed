//! Bayan-stroke selection (mean + standard deviation threshold) and
//! fixed-grid window refinement of peak signals.

use serde::{Deserialize, Serialize};

use crate::envelope::{EnvelopePeak, PeakSignal};
use crate::error::{Result, TalaError};

/// Refinement window length in seconds.
pub const DEFAULT_WINDOW_S: f64 = 0.1;
/// Fewest strokes a threshold may leave before it is relaxed to the mean.
pub const MIN_STROKES: usize = 3;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayanStrokeSignal {
    pub strokes: Vec<EnvelopePeak>,
    /// Mean candidate amplitude.
    pub mu_bp: f64,
    /// Population standard deviation of candidate amplitudes.
    pub sigma_bp: f64,
    /// Threshold actually applied.
    pub threshold: f64,
    /// The strict `mu + sigma` cut kept fewer than [`MIN_STROKES`] peaks and
    /// was relaxed to `amplitude >= mu`.
    pub fallback_used: bool,
}

impl BayanStrokeSignal {
    pub fn times(&self) -> Vec<f64> {
        self.strokes.iter().map(|p| p.time_s).collect()
    }

    /// Consecutive inter-stroke durations in seconds.
    pub fn intervals(&self) -> Vec<f64> {
        self.strokes.windows(2).map(|w| w[1].time_s - w[0].time_s).collect()
    }

    pub(crate) fn as_peak_signal(&self) -> PeakSignal {
        PeakSignal { peaks: self.strokes.clone(), l_max: self.strokes.iter().map(|p| p.amplitude).fold(0.0, f64::max), d_f: 0.0 }
    }
}

/// Keeps the candidates strictly above `mu + sigma`.
pub fn threshold_bayan_peaks(candidates: &PeakSignal) -> Result<BayanStrokeSignal> {
    let amps: Vec<f64> = candidates.peaks.iter().map(|p| p.amplitude).collect();
    if amps.is_empty() {
        return Err(TalaError::EmptyPeakSet);
    }
    let n = amps.len() as f64;
    let mu = amps.iter().sum::<f64>() / n;
    let sigma = (amps.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / n).sqrt();
    let strict = mu + sigma;

    let strokes: Vec<EnvelopePeak> = candidates.peaks.iter().copied().filter(|p| p.amplitude > strict).collect();
    if strokes.len() >= MIN_STROKES {
        return Ok(BayanStrokeSignal { strokes, mu_bp: mu, sigma_bp: sigma, threshold: strict, fallback_used: false });
    }
    // Relative slack so a set of identical amplitudes is not lost to the
    // rounding of its own mean.
    let relaxed = mu - mu.abs() * 1e-12;
    let strokes = candidates.peaks.iter().copied().filter(|p| p.amplitude >= relaxed).collect();
    Ok(BayanStrokeSignal { strokes, mu_bp: mu, sigma_bp: sigma, threshold: mu, fallback_used: true })
}

/// Keeps the strongest peak of every `[k*w, (k+1)*w)` window, then drops
/// the weaker of any two survivors closer than `w` (straddling a window
/// boundary). Ties go to the earlier peak.
pub fn refine(peaks: &PeakSignal, window_s: f64) -> PeakSignal {
    assert!(window_s > 0.0, "window_s must be positive");
    let mut by_window: Vec<EnvelopePeak> = Vec::with_capacity(peaks.len());
    let mut current: Option<i64> = None;
    for &p in &peaks.peaks {
        let w = (p.time_s / window_s + TIME_EPS).floor() as i64;
        match (current, by_window.last_mut()) {
            (Some(c), Some(last)) if c == w => {
                if p.amplitude > last.amplitude {
                    *last = p;
                }
            }
            _ => {
                by_window.push(p);
                current = Some(w);
            }
        }
    }

    let mut order: Vec<usize> = (0..by_window.len()).collect();
    order.sort_by(|&a, &b| by_window[b].amplitude.total_cmp(&by_window[a].amplitude).then(a.cmp(&b)));
    let mut keep = vec![false; by_window.len()];
    let mut kept_times: Vec<f64> = Vec::new();
    for i in order {
        let t = by_window[i].time_s;
        if kept_times.iter().all(|&k| (k - t).abs() >= window_s - TIME_EPS) {
            keep[i] = true;
            kept_times.push(t);
        }
    }
    let refined = by_window.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect();
    PeakSignal { peaks: refined, l_max: peaks.l_max, d_f: peaks.d_f }
}

/// [`refine`] applied to a bayan stroke signal, keeping its statistics.
pub fn refine_strokes(bayan: &BayanStrokeSignal, window_s: f64) -> BayanStrokeSignal {
    let refined = refine(&bayan.as_peak_signal(), window_s);
    BayanStrokeSignal { strokes: refined.peaks, ..bayan.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(peaks: &[(f64, f64)]) -> PeakSignal {
        PeakSignal {
            peaks: peaks.iter().map(|&(t, a)| EnvelopePeak { time_s: t, amplitude: a }).collect(),
            l_max: peaks.iter().map(|p| p.1).fold(0.0, f64::max),
            d_f: 0.01,
        }
    }

    #[test]
    fn keeps_only_the_outlier() {
        let b = threshold_bayan_peaks(&signal(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 5.0), (4.0, 5.0), (5.0, 5.0), (6.0, 1.0), (7.0, 1.0), (8.0, 1.0), (9.0, 1.0), (10.0, 1.0)])).unwrap();
        assert!(!b.fallback_used);
        assert_eq!(b.times(), vec![3.0, 4.0, 5.0]);
    }

    #[test]
    fn hand_computed_statistics() {
        // {1, 1, 1, 5}: mu = 2, sigma = sqrt(3), threshold = 3.732
        let b = threshold_bayan_peaks(&signal(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 5.0)])).unwrap();
        assert!((b.mu_bp - 2.0).abs() < 1e-12);
        assert!((b.sigma_bp - 3f64.sqrt()).abs() < 1e-12);
        // Only one peak clears 3.732, so the relaxed threshold applies.
        assert!(b.fallback_used);
        assert_eq!(b.times(), vec![3.0]);
    }

    #[test]
    fn strict_cut_on_the_textbook_set() {
        let sig = signal(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 5.0)]);
        let mu = 2.0;
        let sigma = 3f64.sqrt();
        let above: Vec<f64> = sig.peaks.iter().filter(|p| p.amplitude > mu + sigma).map(|p| p.time_s).collect();
        assert_eq!(above, vec![3.0]);
    }

    #[test]
    fn equal_amplitudes_fall_back() {
        let b = threshold_bayan_peaks(&signal(&[(0.0, 2.0), (1.0, 2.0), (2.0, 2.0), (3.0, 2.0)])).unwrap();
        assert_eq!(b.sigma_bp, 0.0);
        assert!(b.fallback_used);
        assert_eq!(b.strokes.len(), 4);
    }

    #[test]
    fn singleton_falls_back_and_survives() {
        let b = threshold_bayan_peaks(&signal(&[(1.5, 0.3)])).unwrap();
        assert!(b.fallback_used);
        assert_eq!(b.times(), vec![1.5]);
    }

    #[test]
    fn empty_candidates_error() {
        assert!(matches!(threshold_bayan_peaks(&signal(&[])), Err(TalaError::EmptyPeakSet)));
    }

    #[test]
    fn refine_keeps_strongest_in_window() {
        let r = refine(&signal(&[(0.02, 0.3), (0.07, 0.9)]), 0.1);
        assert_eq!(r.times(), vec![0.07]);
    }

    #[test]
    fn refine_identity_when_spread() {
        let s = signal(&[(0.05, 0.3), (0.2, 0.9), (0.35, 0.1), (1.0, 0.5)]);
        assert_eq!(refine(&s, 0.1), s);
    }

    #[test]
    fn refine_empty() {
        assert!(refine(&signal(&[]), 0.1).is_empty());
    }

    #[test]
    fn boundary_straddlers_are_resolved() {
        let r = refine(&signal(&[(0.099, 0.4), (0.101, 0.6)]), 0.1);
        assert_eq!(r.times(), vec![0.101]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn peak_set() -> impl Strategy<Value = PeakSignal> {
            prop::collection::vec((0u32..20_000, 0.001f64..1.0), 0..200).prop_map(|mut raw| {
                raw.sort_by_key(|r| r.0);
                raw.dedup_by_key(|r| r.0);
                let pairs: Vec<(f64, f64)> = raw.into_iter().map(|(f, a)| (f64::from(f) / 200.0, a)).collect();
                signal(&pairs)
            })
        }

        proptest! {
            #[test]
            fn refine_is_idempotent(p in peak_set(), w in prop::sample::select(vec![0.05, 0.1, 0.25])) {
                let once = refine(&p, w);
                prop_assert_eq!(refine(&once, w), once);
            }

            #[test]
            fn refined_peaks_are_spaced_and_windowed(p in peak_set()) {
                let r = refine(&p, 0.1);
                prop_assert!(r.peaks.windows(2).all(|w| w[1].time_s - w[0].time_s >= 0.1 - 1e-9));
                let mut windows: Vec<i64> = r.peaks.iter().map(|q| (q.time_s / 0.1 + 1e-9).floor() as i64).collect();
                let n = windows.len();
                windows.dedup();
                prop_assert_eq!(windows.len(), n);
            }

            #[test]
            fn threshold_is_gain_invariant(p in peak_set(), gain in 0.001f64..1000.0) {
                prop_assume!(!p.is_empty());
                let scaled = PeakSignal {
                    peaks: p.peaks.iter().map(|q| EnvelopePeak { amplitude: q.amplitude * gain, ..*q }).collect(),
                    ..p.clone()
                };
                let a = threshold_bayan_peaks(&p).unwrap();
                let b = threshold_bayan_peaks(&scaled).unwrap();
                prop_assert_eq!(a.times(), b.times());
            }
        }
    }
}
