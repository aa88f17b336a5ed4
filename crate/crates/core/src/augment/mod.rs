//! Data augmentation: speed and pitch changes, background noise, dynamic
//! range compression, time shifts, window subsampling, and the FIR
//! convolutive-mixture generator.

mod mixture;
mod plan;
mod transforms;

pub use mixture::{convolutive_mixture, MixtureSpec};
pub use plan::{balance_plan, format_plan, parse_plan};
pub use transforms::{
    compress_dynamic_range, mix_background, pitch_shift, subsample_windows, time_shift, time_stretch, white_noise,
};

use std::fmt;

use thiserror::Error;

use crate::audio::{AudioClip, AudioError, Padding};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("{0} has zero power")]
    ZeroPower(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("plan line {line}: {message}")]
    Plan { line: usize, message: String },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    /// Standard normal samples from a seeded stream.
    White {
        seed: u64,
    },
    Clip(AudioClip),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentSpec {
    TimeStretch { rate: f64 },
    PitchShift { semitones: f64 },
    NoiseMix { snr_db: f64, noise: NoiseSource },
    DynRangeCompress { threshold_db: f64, ratio: f64 },
    TimeShift { offset_s: f64, circular: bool },
    SubsampleWindows { offsets_s: Vec<f64>, duration_s: f64 },
}

impl AugmentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AugmentSpec::TimeStretch { .. } => "time_stretch",
            AugmentSpec::PitchShift { .. } => "pitch_shift",
            AugmentSpec::NoiseMix { .. } => "noise_mix",
            AugmentSpec::DynRangeCompress { .. } => "compress",
            AugmentSpec::TimeShift { .. } => "time_shift",
            AugmentSpec::SubsampleWindows { .. } => "subsample",
        }
    }

    /// Applies the transform. Only window subsampling yields more than one clip.
    pub fn apply(&self, clip: &AudioClip) -> Result<Vec<AudioClip>, AugmentError> {
        let one = match self {
            AugmentSpec::TimeStretch { rate } => time_stretch(clip, *rate)?,
            AugmentSpec::PitchShift { semitones } => pitch_shift(clip, *semitones)?,
            AugmentSpec::NoiseMix { snr_db, noise } => match noise {
                NoiseSource::White { seed } => {
                    mix_background(clip, &white_noise(clip.len(), clip.sample_rate(), *seed)?, *snr_db)?
                }
                NoiseSource::Clip(n) => mix_background(clip, n, *snr_db)?,
            },
            AugmentSpec::DynRangeCompress { threshold_db, ratio } => {
                compress_dynamic_range(clip, *threshold_db, *ratio)?
            }
            AugmentSpec::TimeShift { offset_s, circular } => time_shift(clip, *offset_s, *circular)?,
            AugmentSpec::SubsampleWindows { offsets_s, duration_s } => {
                return subsample_windows(clip, offsets_s, *duration_s, Padding::ZeroTail)
            }
        };
        Ok(vec![one])
    }
}

/// Plan-file form, e.g. `transform=time_stretch rate=1.1`. Also used as the
/// provenance tag of augmented recordings.
impl fmt::Display for AugmentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "transform={}", self.name())?;
        match self {
            AugmentSpec::TimeStretch { rate } => write!(f, " rate={rate}"),
            AugmentSpec::PitchShift { semitones } => write!(f, " semitones={semitones}"),
            AugmentSpec::NoiseMix { snr_db, noise } => match noise {
                NoiseSource::White { seed } => write!(f, " snr_db={snr_db} noise=white seed={seed}"),
                NoiseSource::Clip(c) => write!(f, " snr_db={snr_db} noise={}", c.source_id()),
            },
            AugmentSpec::DynRangeCompress { threshold_db, ratio } => {
                write!(f, " threshold_db={threshold_db} ratio={ratio}")
            }
            AugmentSpec::TimeShift { offset_s, circular } => write!(f, " offset_s={offset_s} circular={circular}"),
            AugmentSpec::SubsampleWindows { offsets_s, duration_s } => {
                let list: Vec<String> = offsets_s.iter().map(f64::to_string).collect();
                write!(f, " offsets_s={} duration_s={duration_s}", list.join(","))
            }
        }
    }
}
