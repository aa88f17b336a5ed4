use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{DatasetError, Diagnosis, Manifest};
use crate::audio::{extract_window, peak_normalize, read_wav, resample_linear, AudioClip, AudioError, Padding};
use crate::features::{extract, FeatureConfig, FeatureKind, FeatureMatrix, MfccConfig};

/// Where the analysis window starts inside a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowOffset {
    #[default]
    Start,
    /// Uniform over the valid start positions, drawn from a per-entry stream.
    Seeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    pub duration_s: f64,
    pub offset: WindowOffset,
    pub padding: Padding,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            duration_s: 1.0,
            offset: WindowOffset::Start,
            padding: Padding::ZeroTail,
        }
    }
}

/// What to do with an entry whose file cannot be read or decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorPolicy {
    #[default]
    Fail,
    SkipWithLog,
}

/// Recording → network input: resample, peak-normalize, window, featurize.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Common rate all recordings are resampled to; `None` keeps native rates.
    pub sample_rate: Option<u32>,
    pub window: WindowConfig,
    pub features: FeatureConfig,
    pub on_error: ErrorPolicy,
}

pub const DEFAULT_SAMPLE_RATE: u32 = 4000;

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::for_kind(FeatureKind::Mfcc)
    }
}

impl PipelineConfig {
    pub fn for_kind(kind: FeatureKind) -> Self {
        Self {
            sample_rate: Some(DEFAULT_SAMPLE_RATE),
            window: WindowConfig::default(),
            features: FeatureConfig::for_rate(kind, DEFAULT_SAMPLE_RATE),
            on_error: ErrorPolicy::Fail,
        }
    }

    /// Resample, normalize and cut the analysis window. `stream` selects the
    /// random stream for seeded offsets.
    pub fn prepare(&self, clip: &AudioClip, seed: u64, stream: u64) -> Result<AudioClip, AudioError> {
        let clip = match self.sample_rate {
            Some(sr) => resample_linear(clip, sr)?,
            None => clip.clone(),
        };
        let clip = peak_normalize(&clip)?;
        let offset_s = match self.window.offset {
            WindowOffset::Start => 0.0,
            WindowOffset::Seeded => {
                let sr = clip.sample_rate() as f64;
                let win = (self.window.duration_s * sr).round() as usize;
                let last = clip.len().saturating_sub(win);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                rng.random_range(0..=last) as f64 / sr
            }
        };
        extract_window(&clip, offset_s, self.window.duration_s, self.window.padding)
    }

    pub fn featurize(&self, clip: &AudioClip) -> Result<FeatureMatrix, DatasetError> {
        extract(clip, &self.features).map_err(|error| DatasetError::Feature {
            source_id: clip.source_id().to_string(),
            error,
        })
    }

    /// Settings as `key → value` text, for checkpoint headers.
    pub fn to_meta(&self) -> BTreeMap<String, String> {
        let f = &self.features;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("feature", f.kind.to_string());
        put("frame_len", f.frame_len.to_string());
        put("hop", f.hop.to_string());
        put("n_fft", f.mfcc.n_fft.to_string());
        put("n_mels", f.mfcc.n_mels.to_string());
        put("n_coeffs", f.mfcc.n_coeffs.to_string());
        put("fmin", f.mfcc.fmin.to_string());
        put("fmax", f.mfcc.fmax.map_or("nyquist".into(), |v| v.to_string()));
        put("log_floor", f.mfcc.log_floor.to_string());
        put(
            "sample_rate",
            self.sample_rate.map_or("native".into(), |v| v.to_string()),
        );
        put("window_seconds", self.window.duration_s.to_string());
        put("window_offset", self.window.offset.to_string());
        put("padding", padding_name(self.window.padding).into());
        m
    }

    pub fn from_meta(meta: &BTreeMap<String, String>) -> Result<Self, String> {
        fn get<'a>(m: &'a BTreeMap<String, String>, k: &str) -> Result<&'a str, String> {
            m.get(k)
                .map(String::as_str)
                .ok_or_else(|| format!("missing setting `{k}`"))
        }
        fn num<T: FromStr>(m: &BTreeMap<String, String>, k: &str) -> Result<T, String> {
            let v = get(m, k)?;
            v.parse().map_err(|_| format!("setting `{k}` has invalid value `{v}`"))
        }
        let kind: FeatureKind = get(meta, "feature")?
            .parse()
            .map_err(|e: crate::features::FeatureError| e.to_string())?;
        let fmax = match get(meta, "fmax")? {
            "nyquist" => None,
            _ => Some(num(meta, "fmax")?),
        };
        let sample_rate = match get(meta, "sample_rate")? {
            "native" => None,
            _ => Some(num(meta, "sample_rate")?),
        };
        let padding = match get(meta, "padding")? {
            "zero_tail" => Padding::ZeroTail,
            "reject" => Padding::Reject,
            other => return Err(format!("unknown padding `{other}`")),
        };
        Ok(Self {
            sample_rate,
            window: WindowConfig {
                duration_s: num(meta, "window_seconds")?,
                offset: get(meta, "window_offset")?.parse()?,
                padding,
            },
            features: FeatureConfig {
                kind,
                frame_len: num(meta, "frame_len")?,
                hop: num(meta, "hop")?,
                mfcc: MfccConfig {
                    n_fft: num(meta, "n_fft")?,
                    n_mels: num(meta, "n_mels")?,
                    n_coeffs: num(meta, "n_coeffs")?,
                    fmin: num(meta, "fmin")?,
                    fmax,
                    log_floor: num(meta, "log_floor")?,
                },
            },
            on_error: ErrorPolicy::Fail,
        })
    }
}

fn padding_name(p: Padding) -> &'static str {
    match p {
        Padding::ZeroTail => "zero_tail",
        Padding::Reject => "reject",
    }
}

impl fmt::Display for WindowOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowOffset::Start => "start",
            WindowOffset::Seeded => "seeded",
        })
    }
}

impl FromStr for WindowOffset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "start" => Ok(WindowOffset::Start),
            "seeded" => Ok(WindowOffset::Seeded),
            other => Err(format!("unknown window offset `{other}`")),
        }
    }
}

/// Manifest metadata column holding the augmentation applied to a recording.
pub const PROVENANCE_KEY: &str = "augment";

/// One network input with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureMatrix,
    pub label: Diagnosis,
    pub source_id: String,
    /// Augmentation applied to the source recording, if any.
    pub provenance: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    /// `(source, reason)` for entries that produced no example.
    pub skipped: Vec<(String, String)>,
}

/// Examples for the manifest entries at `indices`, in that order. Silent
/// recordings are always skipped; unreadable ones follow `cfg.on_error`.
pub fn build_examples(
    m: &Manifest,
    indices: &[usize],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(Vec<Example>, BuildReport), DatasetError> {
    let results: Vec<Result<Example, DatasetError>> = indices
        .par_iter()
        .map(|&i| {
            let entry = m.entries().get(i).ok_or_else(|| DatasetError::Parse {
                line: 0,
                message: format!("entry index {i} outside manifest of {}", m.len()),
            })?;
            let path = m.resolve(entry);
            let audio = |error| DatasetError::Audio {
                source_id: path.display().to_string(),
                error,
            };
            let clip = read_wav(&path).map_err(audio)?;
            let window = cfg.prepare(&clip, seed, i as u64).map_err(audio)?;
            Ok(Example {
                features: cfg.featurize(&window)?,
                label: entry.diagnosis,
                source_id: entry.file_path.clone(),
                provenance: entry.metadata.get(PROVENANCE_KEY).cloned(),
            })
        })
        .collect();

    let mut out = Vec::with_capacity(results.len());
    let mut report = BuildReport::default();
    for r in results {
        match r {
            Ok(ex) => out.push(ex),
            Err(DatasetError::Audio {
                source_id,
                error: error @ AudioError::SilentClip { .. },
            }) => {
                log::warn!("skipping silent recording {source_id}");
                report.skipped.push((source_id, error.to_string()));
            }
            Err(e @ DatasetError::Audio { .. }) if cfg.on_error == ErrorPolicy::SkipWithLog => {
                log::warn!("skipping: {e}");
                let DatasetError::Audio { source_id, error } = e else {
                    unreachable!()
                };
                report.skipped.push((source_id, error.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, report))
}
