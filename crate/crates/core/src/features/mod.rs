//! Frame-level features: MFCC, zero-crossing rate and raw waveform frames.
//!
//! Every extractor returns a [`FeatureMatrix`] with `T = 1 + ⌊(N − frame_len) / hop⌋`
//! rows, one per analysis frame, which is the input sequence of the network.

mod fft;
mod mel;
mod standardize;

pub use fft::{dft_power_spectrum, fft_in_place, power_spectrum, Window};
pub use mel::{dct_ii, dct_iii, dct_matrix, hz_to_mel, mel_filterbank, mel_to_hz};
pub use standardize::Standardizer;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::audio::AudioClip;
use crate::linalg::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("signal of {len} samples is shorter than the {frame_len}-sample frame")]
    TooShort { len: usize, frame_len: usize },
    #[error("feature configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FeatureKind {
    #[default]
    Mfcc,
    Zcr,
    Raw,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Zcr => "zcr",
            FeatureKind::Raw => "raw",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mfcc" => Ok(FeatureKind::Mfcc),
            "zcr" => Ok(FeatureKind::Zcr),
            "raw" => Ok(FeatureKind::Raw),
            other => Err(FeatureError::Config(format!("unknown feature kind `{other}`"))),
        }
    }
}

/// Time-major `T × D` feature frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: Matrix,
    frame_len: usize,
    hop: usize,
    kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn new(frames: Matrix, frame_len: usize, hop: usize, kind: FeatureKind) -> Result<Self, FeatureError> {
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(FeatureError::Config("feature matrix must be non-empty".into()));
        }
        if !frames.is_finite() {
            return Err(FeatureError::Config("feature matrix has non-finite entries".into()));
        }
        Ok(Self {
            frames,
            frame_len,
            hop,
            kind,
        })
    }

    /// Builds a matrix directly from per-step vectors, e.g. for synthetic
    /// network inputs. Framing fields are set to zero.
    pub fn from_rows(rows: Vec<Vec<f64>>, kind: FeatureKind) -> Result<Self, FeatureError> {
        let t = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(FeatureError::Config("ragged feature rows".into()));
        }
        let frames = Matrix::from_vec(t, d, rows.concat()).expect("length checked");
        Self::new(frames, 0, 0, kind)
    }

    pub fn steps(&self) -> usize {
        self.frames.rows()
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn step(&self, t: usize) -> &[f64] {
        self.frames.row(t)
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    /// Same frames in reverse time order.
    pub fn reversed(&self) -> Self {
        let t = self.steps();
        let frames = Matrix::from_fn(t, self.dim(), |r, c| self.frames[(t - 1 - r, c)]);
        Self { frames, ..self.clone() }
    }

    /// Rows `0..k`.
    pub fn prefix(&self, k: usize) -> Self {
        let k = k.clamp(1, self.steps());
        let frames =
            Matrix::from_vec(k, self.dim(), self.frames.as_slice()[..k * self.dim()].to_vec()).expect("prefix shape");
        Self { frames, ..self.clone() }
    }

    /// Applies `f` to every row in place.
    pub fn map_rows(&mut self, mut f: impl FnMut(&mut [f64])) {
        for t in 0..self.frames.rows() {
            f(self.frames.row_mut(t));
        }
    }
}

/// MFCC hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub n_fft: usize,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub fmin: f64,
    /// Upper band edge; `None` means the Nyquist frequency.
    pub fmax: Option<f64>,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            n_fft: 256,
            n_mels: 26,
            n_coeffs: 13,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn upper_edge(&self, sample_rate: u32) -> f64 {
        self.fmax.unwrap_or(sample_rate as f64 / 2.0)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), FeatureError> {
        let nyquist = sample_rate as f64 / 2.0;
        let fmax = self.upper_edge(sample_rate);
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(FeatureError::Config(format!(
                "n_fft {} is not a power of two",
                self.n_fft
            )));
        }
        if self.n_mels == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return Err(FeatureError::Config(format!(
                "need 1 <= n_coeffs ({}) <= n_mels ({})",
                self.n_coeffs, self.n_mels
            )));
        }
        if !(self.fmin >= 0.0 && self.fmin < fmax && fmax <= nyquist) {
            return Err(FeatureError::Config(format!(
                "band edges must satisfy 0 <= fmin ({}) < fmax ({fmax}) <= {nyquist}",
                self.fmin
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(FeatureError::Config("log_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Framing and feature selection, in samples at the clip's rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    pub frame_len: usize,
    pub hop: usize,
    pub mfcc: MfccConfig,
}

impl FeatureConfig {
    /// 25 ms frames and 10 ms hop at `sample_rate`.
    pub fn for_rate(kind: FeatureKind, sample_rate: u32) -> Self {
        let sr = sample_rate as f64;
        Self {
            kind,
            frame_len: ((0.025 * sr).round() as usize).max(2),
            hop: ((0.010 * sr).round() as usize).max(1),
            mfcc: MfccConfig::default(),
        }
    }

    /// Feature dimension `D` this configuration produces.
    pub fn dim(&self) -> usize {
        match self.kind {
            FeatureKind::Mfcc => self.mfcc.n_coeffs,
            FeatureKind::Zcr => 1,
            FeatureKind::Raw => self.frame_len,
        }
    }
}

/// Number of frames for `n` samples, or `None` when `n < frame_len`.
pub fn frame_count(n: usize, frame_len: usize, hop: usize) -> Option<usize> {
    (n >= frame_len && frame_len > 0 && hop > 0).then(|| 1 + (n - frame_len) / hop)
}

/// Frame `t` covers samples `[t·hop, t·hop + frame_len)`.
pub fn frame_signal(samples: &[f64], frame_len: usize, hop: usize) -> Result<Vec<&[f64]>, FeatureError> {
    if hop == 0 || frame_len == 0 {
        return Err(FeatureError::Config("frame_len and hop must be >= 1".into()));
    }
    let count = frame_count(samples.len(), frame_len, hop).ok_or(FeatureError::TooShort {
        len: samples.len(),
        frame_len,
    })?;
    Ok((0..count).map(|t| &samples[t * hop..t * hop + frame_len]).collect())
}

/// MFCC extractor with a precomputed filterbank and DCT.
#[derive(Debug, Clone)]
pub struct Mfcc {
    cfg: MfccConfig,
    filterbank: Matrix,
    dct: Matrix,
}

impl Mfcc {
    pub fn new(cfg: &MfccConfig, sample_rate: u32) -> Result<Self, FeatureError> {
        let filterbank = mel_filterbank(cfg, sample_rate)?;
        let dct = dct_matrix(cfg.n_mels);
        Ok(Self {
            cfg: cfg.clone(),
            filterbank,
            dct,
        })
    }

    /// Hann window → power spectrum → mel energies → floored log → DCT-II.
    pub fn frame(&self, frame: &[f64]) -> Result<Vec<f64>, FeatureError> {
        let power = power_spectrum(frame, self.cfg.n_fft, Window::Hann)?;
        let log_mel: Vec<f64> = self
            .filterbank
            .matvec(&power)
            .into_iter()
            .map(|e| e.max(self.cfg.log_floor).ln())
            .collect();
        let mut c = self.dct.matvec(&log_mel);
        c.truncate(self.cfg.n_coeffs);
        Ok(c)
    }
}

pub fn mfcc(clip: &AudioClip, cfg: &MfccConfig, frame_len: usize, hop: usize) -> Result<FeatureMatrix, FeatureError> {
    let ex = Mfcc::new(cfg, clip.sample_rate())?;
    let frames = frame_signal(clip.samples(), frame_len, hop)?;
    let mut data = Vec::with_capacity(frames.len() * cfg.n_coeffs);
    for f in &frames {
        data.extend(ex.frame(f)?);
    }
    let m = Matrix::from_vec(frames.len(), cfg.n_coeffs, data).expect("mfcc shape");
    FeatureMatrix::new(m, frame_len, hop, FeatureKind::Mfcc)
}

/// Fraction of adjacent pairs with differing sign; zero counts as nonnegative.
pub fn frame_zcr(frame: &[f64]) -> f64 {
    if frame.len() < 2 {
        return 0.0;
    }
    let crossings = frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    crossings as f64 / (frame.len() - 1) as f64
}

pub fn zero_crossing_rate(clip: &AudioClip, frame_len: usize, hop: usize) -> Result<FeatureMatrix, FeatureError> {
    if frame_len < 2 {
        return Err(FeatureError::Config(
            "zero-crossing frames need at least 2 samples".into(),
        ));
    }
    let frames = frame_signal(clip.samples(), frame_len, hop)?;
    let data: Vec<f64> = frames.iter().map(|f| frame_zcr(f)).collect();
    let m = Matrix::from_vec(frames.len(), 1, data).expect("zcr shape");
    FeatureMatrix::new(m, frame_len, hop, FeatureKind::Zcr)
}

pub fn raw_frames(clip: &AudioClip, frame_len: usize, hop: usize) -> Result<FeatureMatrix, FeatureError> {
    let frames = frame_signal(clip.samples(), frame_len, hop)?;
    let m = Matrix::from_vec(frames.len(), frame_len, frames.concat()).expect("raw shape");
    FeatureMatrix::new(m, frame_len, hop, FeatureKind::Raw)
}

/// Dispatches on `cfg.kind`.
pub fn extract(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix, FeatureError> {
    match cfg.kind {
        FeatureKind::Mfcc => mfcc(clip, &cfg.mfcc, cfg.frame_len, cfg.hop),
        FeatureKind::Zcr => zero_crossing_rate(clip, cfg.frame_len, cfg.hop),
        FeatureKind::Raw => raw_frames(clip, cfg.frame_len, cfg.hop),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip(v: Vec<f64>, sr: u32) -> AudioClip {
        AudioClip::new(v, sr, "f").unwrap()
    }

    #[test]
    fn framing_counts() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let f = frame_signal(&x, 4, 2).unwrap();
        assert_eq!(f.len(), 4);
        assert_eq!(f[3], &[6.0, 7.0, 8.0, 9.0]);
        assert_eq!(frame_signal(&x, 10, 3).unwrap(), vec![&x[..]]);
        assert_eq!(
            frame_signal(&x[..3], 4, 1).unwrap_err(),
            FeatureError::TooShort { len: 3, frame_len: 4 }
        );
    }

    #[test]
    fn zcr_examples() {
        assert_eq!(frame_zcr(&[0.3; 8]), 0.0);
        assert_eq!(frame_zcr(&[1.0, -1.0, 1.0, -1.0, 1.0]), 1.0);
        assert_eq!(frame_zcr(&[1.0, -1.0, 1.0, 1.0]), 2.0 / 3.0);
        assert_eq!(frame_zcr(&[0.0; 8]), 0.0);
    }

    #[test]
    fn raw_frames_tile_signal() {
        let x: Vec<f64> = (0..23).map(|i| (i as f64 * 0.1).sin()).collect();
        let c = clip(x.clone(), 100);
        let single = raw_frames(&c, 23, 23).unwrap();
        assert_eq!(single.steps(), 1);
        assert_eq!(single.step(0), &x[..]);
        let tiled = raw_frames(&c, 5, 5).unwrap();
        assert_eq!(tiled.steps(), 4);
        assert_eq!(tiled.frames().as_slice(), &x[..20]);
    }

    #[test]
    fn silent_mfcc_is_dc_only() {
        let cfg = MfccConfig::default();
        let c = clip(vec![0.0; 400], 4000);
        let m = mfcc(&c, &cfg, 100, 40).unwrap();
        let expect0 = (cfg.n_mels as f64).sqrt() * cfg.log_floor.ln();
        for t in 0..m.steps() {
            let row = m.step(t);
            assert_eq!(row, m.step(0));
            assert!((row[0] - expect0).abs() < 1e-9);
            for &v in &row[1..] {
                assert!(v.abs() < 1e-12, "{v}");
            }
        }
    }

    #[test]
    fn mfcc_is_deterministic() {
        let x: Vec<f64> = (0..4000).map(|i| (i as f64 * 0.37).sin() * 0.5).collect();
        let cfg = FeatureConfig::for_rate(FeatureKind::Mfcc, 4000);
        let a = extract(&clip(x.clone(), 4000), &cfg).unwrap();
        let b = extract(&clip(x, 4000), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps(), frame_count(4000, 100, 40).unwrap());
        assert_eq!(a.dim(), 13);
    }

    #[test]
    fn config_validation() {
        let mut cfg = MfccConfig::default();
        assert!(cfg.validate(4000).is_ok());
        cfg.fmax = Some(3000.0);
        assert!(cfg.validate(4000).is_err());
        cfg.fmax = None;
        cfg.n_coeffs = 30;
        assert!(cfg.validate(4000).is_err());
        cfg.n_coeffs = 13;
        cfg.n_fft = 200;
        assert!(cfg.validate(4000).is_err());
    }

    proptest! {
        #[test]
        fn zcr_bounded_and_scale_invariant(
            v in proptest::collection::vec(-1.0f64..1.0, 8..200),
            alpha in 1e-3f64..1e3,
        ) {
            let c = clip(v.clone(), 1000);
            let z = zero_crossing_rate(&c, 8, 3).unwrap();
            let scaled = clip(v.iter().map(|x| x * alpha).collect(), 1000);
            let zs = zero_crossing_rate(&scaled, 8, 3).unwrap();
            prop_assert_eq!(&z, &zs);
            prop_assert!(z.frames().as_slice().iter().all(|&r| (0.0..=1.0).contains(&r)));
        }

        #[test]
        fn mfcc_always_finite(v in proptest::collection::vec(-1.0f64..1.0, 100..600), silent in any::<bool>()) {
            let v = if silent { vec![0.0; v.len()] } else { v };
            let m = mfcc(&clip(v, 4000), &MfccConfig::default(), 100, 40).unwrap();
            prop_assert!(m.frames().is_finite());
        }
    }
}
