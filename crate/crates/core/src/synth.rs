//! Seeded synthetic recordings: one sinusoid per class, with random phase,
//! amplitude and additive Gaussian noise. Used for tests, benchmarks and demos.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::audio::{write_wav, AudioClip, AudioError, SampleFormat};
use crate::dataset::{DatasetError, Diagnosis, Example, PipelineConfig};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq)]
pub struct ToneConfig {
    pub sample_rate: u32,
    pub duration_s: f64,
    /// Frequency of class 0.
    pub base_hz: f64,
    /// Frequency increment between consecutive classes.
    pub step_hz: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for ToneConfig {
    fn default() -> Self {
        Self {
            sample_rate: 4000,
            duration_s: 1.0,
            base_hz: 200.0,
            step_hz: 150.0,
            noise_std: 0.05,
            seed: 7,
        }
    }
}

impl ToneConfig {
    pub fn frequency(&self, class: usize) -> f64 {
        self.base_hz + self.step_hz * class as f64
    }

    /// Clip number `index` of class `class`; each index has its own stream.
    pub fn clip(&self, class: usize, index: u64) -> Result<AudioClip, AudioError> {
        if class >= NUM_CLASSES {
            return Err(AudioError::InvalidClip(format!("class {class} out of range")));
        }
        if !(self.duration_s > 0.0) || self.frequency(class) >= self.sample_rate as f64 / 2.0 {
            return Err(AudioError::InvalidClip("tone does not fit the sample rate".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let amp = rng.random_range(0.3..0.9);
        let noise = Normal::new(0.0, self.noise_std.max(0.0)).map_err(|e| AudioError::InvalidClip(e.to_string()))?;
        let sr = self.sample_rate as f64;
        let n = (self.duration_s * sr).round().max(1.0) as usize;
        let w = std::f64::consts::TAU * self.frequency(class) / sr;
        let samples = (0..n)
            .map(|i| amp * (w * i as f64 + phase).sin() + noise.sample(&mut rng))
            .collect();
        AudioClip::new(samples, self.sample_rate, format!("tone:{class}:{index}"))
    }

    /// `n` examples, labels cycling through the classes in code order, run
    /// through `pipeline` at window seed `seed`.
    pub fn examples(&self, n: usize, pipeline: &PipelineConfig) -> Result<Vec<Example>, DatasetError> {
        (0..n)
            .map(|i| {
                let class = i % NUM_CLASSES;
                let clip = self.clip(class, i as u64).map_err(|error| DatasetError::Audio {
                    source_id: format!("tone:{class}:{i}"),
                    error,
                })?;
                let window = pipeline
                    .prepare(&clip, self.seed, i as u64)
                    .map_err(|error| DatasetError::Audio {
                        source_id: clip.source_id().to_string(),
                        error,
                    })?;
                Ok(Example {
                    features: pipeline.featurize(&window)?,
                    label: Diagnosis::ALL[class],
                    source_id: clip.source_id().to_string(),
                    provenance: None,
                })
            })
            .collect()
    }

    /// Writes an ingestible corpus: `patients` patients numbered from 101,
    /// patient `p` having class `p % 8`, each with `files_per_patient`
    /// recordings named like `101_1b1_Al_sc_Synth.wav`, plus a diagnosis
    /// table `diagnosis.csv`. Returns the table path.
    pub fn write_corpus(
        &self,
        dir: &Path,
        patients: usize,
        files_per_patient: usize,
    ) -> Result<std::path::PathBuf, DatasetError> {
        std::fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
        let mut table = String::from("patient,diagnosis\n");
        let mut index = 0u64;
        for p in 0..patients {
            let pid = 101 + p;
            let class = p % NUM_CLASSES;
            let _ = writeln!(table, "{pid},{}", Diagnosis::ALL[class]);
            for r in 0..files_per_patient {
                let name = format!("{pid}_{}b1_Al_sc_Synth.wav", r + 1);
                let clip = self.clip(class, index).map_err(|error| DatasetError::Audio {
                    source_id: name.clone(),
                    error,
                })?;
                index += 1;
                write_wav(dir.join(&name), &clip, SampleFormat::Pcm16)
                    .map_err(|error| DatasetError::Audio { source_id: name, error })?;
            }
        }
        let path = dir.join("diagnosis.csv");
        std::fs::write(&path, table).map_err(|e| DatasetError::io(&path, e))?;
        Ok(path)
    }
}
