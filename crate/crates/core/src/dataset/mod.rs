//! Labeled corpus management: the eight diagnosis classes, manifest
//! ingestion, class distributions, train/validation/test splits and the
//! audio-to-feature example pipeline.

mod examples;
mod icbhi;
mod manifest;
mod split;

pub use examples::{
    build_examples, BuildReport, ErrorPolicy, Example, PipelineConfig, WindowConfig, WindowOffset, DEFAULT_SAMPLE_RATE,
    PROVENANCE_KEY,
};
pub use icbhi::{ingest_corpus, parse_diagnosis_table, patient_id_from_name, IngestReport};
pub use manifest::{class_distribution, ClassDistribution, Manifest, ManifestEntry};
pub use split::{split, Grouping, SplitAssignment, SplitConfig, SplitFractions, Subset};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::audio::AudioError;
use crate::features::FeatureError;
use crate::NUM_CLASSES;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: unknown diagnosis `{value}`")]
    UnknownDiagnosis { line: u64, value: String },
    #[error("line {line}: duplicate file_path `{path}`")]
    DuplicatePath { line: u64, path: String },
    #[error("patient {patient} is labeled both {first} and {second}")]
    PatientConflict {
        patient: u32,
        first: Diagnosis,
        second: Diagnosis,
    },
    #[error("manifest is empty")]
    Empty,
    #[error("{n} entries cannot fill {needed} subsets")]
    TooFew { n: usize, needed: usize },
    #[error("split fractions: {0}")]
    Fractions(String),
    #[error("no leading patient number in audio file name `{0}`")]
    UnmatchedFile(String),
    #[error("patients missing from the diagnosis table: {0:?}")]
    MissingPatients(Vec<u32>),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{source_id}: {error}")]
    Audio { source_id: String, error: AudioError },
    #[error("{source_id}: {error}")]
    Feature { source_id: String, error: FeatureError },
}

impl DatasetError {
    pub(crate) fn io(path: &std::path::Path, e: impl fmt::Display) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// The eight diagnosis classes with stable codes 0–7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Diagnosis {
    Healthy,
    Asthma,
    Copd,
    Lrti,
    Urti,
    Bronchiectasis,
    Bronchiolitis,
    Pneumonia,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; NUM_CLASSES] = [
        Diagnosis::Healthy,
        Diagnosis::Asthma,
        Diagnosis::Copd,
        Diagnosis::Lrti,
        Diagnosis::Urti,
        Diagnosis::Bronchiectasis,
        Diagnosis::Bronchiolitis,
        Diagnosis::Pneumonia,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Diagnosis::Healthy => "Healthy",
            Diagnosis::Asthma => "Asthma",
            Diagnosis::Copd => "COPD",
            Diagnosis::Lrti => "LRTI",
            Diagnosis::Urti => "URTI",
            Diagnosis::Bronchiectasis => "Bronchiectasis",
            Diagnosis::Bronchiolitis => "Bronchiolitis",
            Diagnosis::Pneumonia => "Pneumonia",
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Diagnosis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        Self::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| t.to_string())
    }
}
