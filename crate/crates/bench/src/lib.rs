//! Fixtures shared by the criterion benches.

use respiro::audio::AudioClip;
use respiro::dataset::PipelineConfig;
use respiro::features::{FeatureKind, FeatureMatrix, Standardizer};
use respiro::nn::{Architecture, Direction, ModelConfig, ModelParams};
use respiro::synth::ToneConfig;

/// One second of the class-`class` synthetic tone at 4000 Hz.
pub fn tone(class: usize) -> AudioClip {
    ToneConfig::default().clip(class, class as u64).expect("tone fixture")
}

/// Standardized features of [`tone`] for `kind`.
pub fn features(kind: FeatureKind) -> FeatureMatrix {
    let pipeline = PipelineConfig::for_kind(kind);
    let window = pipeline.prepare(&tone(2), 7, 0).expect("window");
    let mut f = pipeline.featurize(&window).expect("features");
    Standardizer::fit([&f]).expect("fit").apply(&mut f).expect("apply");
    f
}

pub fn model(input_dim: usize, hidden: usize, direction: Direction) -> ModelParams {
    let cfg = ModelConfig {
        input_dim,
        hidden,
        arch: Architecture {
            direction,
            ..Default::default()
        },
        forget_bias_one: false,
    };
    ModelParams::init(&cfg, 7).expect("model fixture")
}
