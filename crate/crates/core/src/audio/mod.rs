//! Audio ingestion: container parsing, peak normalization, windowing and
//! linear-interpolation resampling.
//!
//! All amplitudes are `f64`; integer PCM is scaled to `[-1, 1]` on parse.

mod wav;

pub use wav::{encode_wav, parse_wav, read_wav, write_wav, SampleFormat};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AudioError {
    #[error("malformed RIFF/WAVE header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("unsupported encoding at byte {offset}: format tag {tag}, {bits} bits per sample")]
    UnsupportedEncoding { offset: usize, tag: u16, bits: u16 },
    #[error("truncated chunk at byte {offset}: declared {declared} bytes, {available} available")]
    TruncatedChunk {
        offset: usize,
        declared: usize,
        available: usize,
    },
    #[error("zero sample rate declared in format chunk at byte {offset}")]
    ZeroSampleRate { offset: usize },
    #[error("clip `{source_id}` is silent (all samples zero)")]
    SilentClip { source_id: String },
    #[error("window [{start}, {end}) exceeds clip of {len} samples")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("i/o error on `{path}`: {message}")]
    Io { path: String, message: String },
}

/// Mono sample sequence with its sample rate and origin.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(AudioError::InvalidClip("clip has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(AudioError::InvalidClip(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Same rate and source id, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Result<Self, AudioError> {
        Self::new(samples, self.sample_rate, self.source_id.clone())
    }
}

/// Divides every sample by the peak absolute amplitude.
///
/// The peak sample maps to exactly ±1, so the operation is idempotent bitwise.
pub fn peak_normalize(clip: &AudioClip) -> Result<AudioClip, AudioError> {
    let peak = clip.peak();
    if peak == 0.0 {
        return Err(AudioError::SilentClip {
            source_id: clip.source_id.clone(),
        });
    }
    clip.with_samples(clip.samples.iter().map(|x| x / peak).collect())
}

/// What to do when a requested window runs past the end of the clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    /// Fill the missing tail with zeros.
    #[default]
    ZeroTail,
    /// Report an out-of-range error.
    Reject,
}

/// Extracts `round(duration·sr)` samples starting at `round(offset·sr)`.
pub fn extract_window(
    clip: &AudioClip,
    offset_s: f64,
    duration_s: f64,
    padding: Padding,
) -> Result<AudioClip, AudioError> {
    if !(offset_s >= 0.0) || !offset_s.is_finite() {
        return Err(AudioError::InvalidClip(format!(
            "window offset {offset_s} must be >= 0"
        )));
    }
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(AudioError::InvalidClip(format!(
            "window duration {duration_s} must be > 0"
        )));
    }
    let sr = clip.sample_rate as f64;
    let start = (offset_s * sr).round() as usize;
    let len = (duration_s * sr).round() as usize;
    if len == 0 {
        return Err(AudioError::InvalidClip(format!(
            "window of {duration_s} s is shorter than one sample"
        )));
    }
    let n = clip.len();
    let end = start + len;
    if start >= n || (end > n && padding == Padding::Reject) {
        return Err(AudioError::OutOfRange { start, end, len: n });
    }
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&clip.samples[start..end.min(n)]);
    out.resize(len, 0.0);
    clip.with_samples(out)
}

/// Linear-interpolation resampler with endpoint hold.
///
/// Output length is `round(N · target / sr)`; output sample `j` reads the
/// input at fractional position `j · sr / target`.
pub fn resample_linear(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidClip("target rate must be positive".into()));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let n = clip.len();
    let ratio = clip.sample_rate as f64 / target_rate as f64;
    let out_len = (n as f64 * target_rate as f64 / clip.sample_rate as f64).round() as usize;
    if out_len == 0 {
        return Err(AudioError::InvalidClip(format!(
            "resampling {n} samples to {target_rate} Hz leaves no samples"
        )));
    }
    let s = &clip.samples;
    let out = (0..out_len)
        .map(|j| {
            let pos = j as f64 * ratio;
            let idx = pos.floor() as usize;
            if idx + 1 >= n {
                return s[n - 1];
            }
            let frac = pos - idx as f64;
            let (a, b) = (s[idx], s[idx + 1]);
            (a + frac * (b - a)).clamp(a.min(b), a.max(b))
        })
        .collect();
    AudioClip::new(out, target_rate, clip.source_id.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip(samples: Vec<f64>, sr: u32) -> AudioClip {
        AudioClip::new(samples, sr, "test").unwrap()
    }

    #[test]
    fn normalize_divides_by_peak() {
        let c = peak_normalize(&clip(vec![0.5, -0.25], 8000)).unwrap();
        assert_eq!(c.samples(), &[1.0, -0.5]);
        let c = peak_normalize(&clip(vec![1.0, 0.0], 8000)).unwrap();
        assert_eq!(c.samples(), &[1.0, 0.0]);
    }

    #[test]
    fn normalize_rejects_silence() {
        let err = peak_normalize(&clip(vec![0.0, 0.0], 8000)).unwrap_err();
        assert!(matches!(err, AudioError::SilentClip { .. }));
    }

    #[test]
    fn window_lengths() {
        let c = clip(vec![0.1; 80_000], 8000);
        assert_eq!(extract_window(&c, 0.0, 1.0, Padding::Reject).unwrap().len(), 8000);
        let full = extract_window(&c, 0.0, 10.0, Padding::Reject).unwrap();
        assert_eq!(full, c);
    }

    #[test]
    fn short_clip_is_zero_padded() {
        let c = clip(vec![0.5; 4000], 8000);
        let w = extract_window(&c, 0.0, 1.0, Padding::ZeroTail).unwrap();
        assert_eq!(w.len(), 8000);
        assert!(w.samples()[..4000].iter().all(|&x| x == 0.5));
        assert!(w.samples()[4000..].iter().all(|&x| x == 0.0));
        let err = extract_window(&c, 0.0, 1.0, Padding::Reject).unwrap_err();
        assert!(matches!(
            err,
            AudioError::OutOfRange {
                start: 0,
                end: 8000,
                len: 4000
            }
        ));
    }

    #[test]
    fn window_offset_rounds() {
        let c = clip((0..100).map(|i| i as f64).collect(), 10);
        let w = extract_window(&c, 0.26, 0.5, Padding::Reject).unwrap();
        assert_eq!(w.samples(), &[3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn resample_examples() {
        let c = clip(vec![0.0, 1.0], 2);
        assert_eq!(resample_linear(&c, 4).unwrap().samples(), &[0.0, 0.5, 1.0, 1.0]);
        let same = clip(vec![0.3, -0.2, 0.9], 8000);
        assert_eq!(resample_linear(&same, 8000).unwrap(), same);
        let konst = clip(vec![0.25; 37], 8000);
        let r = resample_linear(&konst, 3000).unwrap();
        assert_eq!(r.len(), (37.0_f64 * 3000.0 / 8000.0).round() as usize);
        assert!(r.samples().iter().all(|&x| x == 0.25));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(v in proptest::collection::vec(-1.0f64..1.0, 1..64)) {
            prop_assume!(v.iter().any(|&x| x != 0.0));
            let once = peak_normalize(&clip(v, 100)).unwrap();
            prop_assert_eq!(once.peak(), 1.0);
            let twice = peak_normalize(&once).unwrap();
            prop_assert_eq!(once.samples(), twice.samples());
        }

        #[test]
        fn resample_stays_within_bounds(
            v in proptest::collection::vec(-1.0f64..1.0, 2..128),
            target in 1u32..20_000,
        ) {
            let c = clip(v.clone(), 8000);
            if let Ok(r) = resample_linear(&c, target) {
                let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(r.samples().iter().all(|&x| x >= lo && x <= hi));
                let expect = (v.len() as f64 * target as f64 / 8000.0).round() as usize;
                prop_assert_eq!(r.len(), expect);
            }
        }

        #[test]
        fn full_window_is_identity(v in proptest::collection::vec(-1.0f64..1.0, 1..200)) {
            let c = clip(v, 50);
            let w = extract_window(&c, 0.0, c.duration_secs(), Padding::Reject).unwrap();
            prop_assert_eq!(w, c);
        }
    }
}
