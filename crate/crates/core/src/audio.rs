//! WAV decoding, mono mixdown and sample-rate conversion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TalaError};

/// Sample rate every analysis stage expects.
pub const CANONICAL_RATE_HZ: u32 = 44_100;

/// Uniformly sampled mono waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting non-finite samples and a zero rate.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(TalaError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(TalaError::InvalidClip(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    /// Silent clip of the given length.
    pub fn silence(duration_s: f64, sample_rate_hz: u32) -> Self {
        let n = (duration_s * f64::from(sample_rate_hz)).round().max(0.0) as usize;
        Self { samples: vec![0.0; n], sample_rate_hz }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Same clip with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self { samples, sample_rate_hz: self.sample_rate_hz }
    }
}

/// Decodes a PCM (8/16/24/32-bit integer) or IEEE-float WAV file.
///
/// Stereo input is averaged to mono. Integer samples are scaled into
/// `[-1, 1]`; float samples are clamped there and non-finite values are
/// replaced by silence. The file's own sample rate is kept.
pub fn load_clip(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| match format_tag(path) {
        Some(tag) if ![1, 3, 0xfffe].contains(&tag) => TalaError::UnsupportedEncoding {
            path: path.to_path_buf(),
            reason: format!("WAV format tag {tag:#06x} is not PCM or IEEE float"),
        },
        _ => map_hound_error(path, e),
    })?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 || channels > 2 {
        return Err(TalaError::UnsupportedEncoding {
            path: path.to_path_buf(),
            reason: format!("{channels} channels (only mono and stereo are supported)"),
        });
    }

    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if !(8..=32).contains(&spec.bits_per_sample) {
                return Err(TalaError::UnsupportedEncoding {
                    path: path.to_path_buf(),
                    reason: format!("{}-bit integer samples", spec.bits_per_sample),
                });
            }
            let full_scale = f64::from(1u32 << (spec.bits_per_sample - 1).min(31));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| (f64::from(v) / full_scale).clamp(-1.0, 1.0)))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound_error(path, e))?
        }
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(TalaError::UnsupportedEncoding {
                    path: path.to_path_buf(),
                    reason: format!("{}-bit float samples", spec.bits_per_sample),
                });
            }
            reader
                .samples::<f32>()
                .map(|s| {
                    s.map(|v| {
                        let v = f64::from(v);
                        if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 }
                    })
                })
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound_error(path, e))?
        }
    };

    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved.chunks_exact(2).map(|f| 0.5 * (f[0] + f[1])).collect()
    };
    if mono.is_empty() {
        return Err(TalaError::UnreadableFile {
            path: path.to_path_buf(),
            reason: "file contains no samples".into(),
        });
    }
    AudioClip::new(mono, spec.sample_rate)
}

/// Format tag of the first `fmt ` chunk, read without validating the rest
/// of the header.
fn format_tag(path: &Path) -> Option<u16> {
    let bytes = std::fs::read(path).ok()?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return None;
    }
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().ok()?) as usize;
        if &bytes[pos..pos + 4] == b"fmt " {
            return bytes.get(pos + 8..pos + 10).map(|b| u16::from_le_bytes([b[0], b[1]]));
        }
        pos += 8 + len + (len & 1);
    }
    None
}

fn map_hound_error(path: &Path, err: hound::Error) -> TalaError {
    match err {
        hound::Error::Unsupported => TalaError::UnsupportedEncoding {
            path: path.to_path_buf(),
            reason: "compressed or unknown WAV format tag".into(),
        },
        hound::Error::TooWide | hound::Error::InvalidSampleFormat => TalaError::UnsupportedEncoding {
            path: path.to_path_buf(),
            reason: err.to_string(),
        },
        other => TalaError::UnreadableFile { path: path.to_path_buf(), reason: other.to_string() },
    }
}

/// Writes a clip as 16-bit PCM mono WAV at the clip's own rate.
pub fn write_wav_pcm16(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let io_err = |e: hound::Error| match e {
        hound::Error::IoError(source) => TalaError::Io { path: path.to_path_buf(), source },
        other => TalaError::UnreadableFile { path: path.to_path_buf(), reason: other.to_string() },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(io_err)?;
    for &s in clip.samples() {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(io_err)?;
    }
    writer.finalize().map_err(io_err)
}

/// Linear-interpolation resampling.
///
/// Output sample `j` sits at time `j / target_rate_hz`; samples past the
/// last input sample hold its value. Equal rates return an exact copy.
pub fn resample(clip: &AudioClip, target_rate_hz: u32) -> Result<AudioClip> {
    if target_rate_hz == 0 {
        return Err(TalaError::InvalidClip("target sample rate must be positive".into()));
    }
    let src_rate = clip.sample_rate_hz();
    if src_rate == target_rate_hz {
        return Ok(clip.clone());
    }
    let input = clip.samples();
    if input.is_empty() {
        return AudioClip::new(Vec::new(), target_rate_hz);
    }
    let ratio = f64::from(src_rate) / f64::from(target_rate_hz);
    let out_len = (input.len() as f64 / ratio).round().max(1.0) as usize;
    let last = input.len() - 1;
    let out = (0..out_len)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i = pos.floor() as usize;
            if i >= last {
                input[last]
            } else {
                let frac = pos - i as f64;
                input[i] + (input[i + 1] - input[i]) * frac
            }
        })
        .collect();
    AudioClip::new(out, target_rate_hz)
}

/// Resamples to [`CANONICAL_RATE_HZ`] when needed.
pub fn canonicalize(clip: &AudioClip) -> Result<AudioClip> {
    resample(clip, CANONICAL_RATE_HZ)
}
