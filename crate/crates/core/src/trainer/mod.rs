//! Training protocol: per-example SGD over shuffled epochs, per-epoch curves,
//! held-out evaluation and reference baselines.

mod metrics;
mod report;

pub use metrics::{
    chance_baseline, evaluate, majority_baseline, plateau_detector, predict, EvalReport, PLATEAU_MIN_DELTA,
};
pub use report::{
    curves_csv, curves_from_csv, curves_table, report_csv, report_from_csv, report_table, ReportParseError,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::Example;
use crate::features::Standardizer;
use crate::nn::{loss_and_gradients, sgd_step, Architecture, ModelConfig, ModelParams, NnError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainerError {
    #[error("training configuration: {0}")]
    Config(String),
    #[error("{0} set is empty")]
    Empty(&'static str),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("loss became non-finite at epoch {epoch}, example {position}")]
    Diverged { epoch: usize, position: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    pub arch: Architecture,
    pub forget_bias_one: bool,
    pub seed: u64,
    pub shuffle: bool,
    /// Rescale each example's gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
    /// Return the parameters of the epoch with the best validation accuracy
    /// instead of the final ones.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 0.01,
            hidden: 32,
            arch: Architecture::default(),
            forget_bias_one: false,
            seed: 7,
            shuffle: true,
            clip_norm: None,
            keep_best: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        if self.epochs == 0 {
            return Err(TrainerError::Config("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainerError::Config(format!("lr {} must be positive", self.lr)));
        }
        if self.hidden == 0 {
            return Err(TrainerError::Config("hidden size must be >= 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(TrainerError::Config(format!("clip norm {c} must be positive")));
            }
        }
        Ok(())
    }

    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            hidden: self.hidden,
            arch: self.arch,
            forget_bias_one: self.forget_bias_one,
        }
    }

    /// Fresh model seeded from `self.seed`.
    pub fn init_model(&self, input_dim: usize) -> Result<ModelParams, TrainerError> {
        self.validate()?;
        Ok(ModelParams::init(&self.model_config(input_dim), self.seed)?)
    }
}

/// Metrics after one full epoch. Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelParams,
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned when `keep_best` is set.
    pub best_epoch: Option<usize>,
}

fn sgd_example(model: &mut ModelParams, ex: &Example, cfg: &TrainConfig, lr: f64) -> Result<f64, TrainerError> {
    let (loss, mut g) = loss_and_gradients(model, &ex.features, ex.label.code())?;
    if let Some(max) = cfg.clip_norm {
        let norm = g.l2_norm();
        if norm > max {
            g.scale(max / norm);
        }
    }
    sgd_step(model, &g, lr)?;
    Ok(loss)
}

/// Runs `cfg.epochs` epochs of per-example SGD. The visiting order is
/// reshuffled every epoch from one seeded stream.
pub fn train(
    model: ModelParams,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainerError> {
    cfg.validate()?;
    train_with_lr(model, train_set, val_set, cfg, cfg.lr)
}

/// [`train`] without the `lr > 0` check, so a zero step can be exercised.
#[doc(hidden)]
pub fn train_with_lr(
    mut model: ModelParams,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
    lr: f64,
) -> Result<TrainOutcome, TrainerError> {
    if train_set.is_empty() {
        return Err(TrainerError::Empty("training"));
    }
    if let Some(ex) = train_set
        .iter()
        .chain(val_set)
        .find(|e| e.features.dim() != model.input_dim())
    {
        return Err(TrainerError::Nn(NnError::Shape(format!(
            "example `{}` has feature dim {}, model expects {}",
            ex.source_id,
            ex.features.dim(),
            model.input_dim()
        ))));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for (position, &i) in order.iter().enumerate() {
            let loss = sgd_example(&mut model, &train_set[i], cfg, lr)?;
            if !loss.is_finite() || !model.l2_norm().is_finite() {
                return Err(TrainerError::Diverged { epoch, position });
            }
        }
        let tr = evaluate(&model, train_set)?;
        let va = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(&model, val_set)?)
        };
        records.push(EpochRecord {
            epoch,
            train_loss: tr.mean_loss,
            train_acc: tr.accuracy,
            val_loss: va.as_ref().map(|r| r.mean_loss),
            val_acc: va.as_ref().map(|r| r.accuracy),
        });
        if cfg.keep_best {
            let score = va.as_ref().map_or(tr.accuracy, |r| r.accuracy);
            if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
                best = Some((score, epoch, model.clone()));
            }
        }
    }
    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, Some(e)),
        None => (model, None),
    };
    Ok(TrainOutcome {
        model,
        records,
        best_epoch,
    })
}

/// Fits a [`Standardizer`] on `train_set` and applies it to every set.
pub fn standardize_sets(
    train_set: &mut [Example],
    others: &mut [&mut [Example]],
) -> Result<Standardizer, TrainerError> {
    let s =
        Standardizer::fit(train_set.iter().map(|e| &e.features)).map_err(|e| TrainerError::Config(e.to_string()))?;
    for ex in train_set
        .iter_mut()
        .chain(others.iter_mut().flat_map(|set| set.iter_mut()))
    {
        s.apply(&mut ex.features)
            .map_err(|e| TrainerError::Config(e.to_string()))?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Diagnosis;
    use crate::features::{FeatureKind, FeatureMatrix};
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> Vec<Example> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = Diagnosis::ALL[i % 8];
                let rows = (0..4)
                    .map(|_| {
                        (0..3)
                            .map(|j| if j == label.code() % 3 { 1.0 } else { 0.0 } + 0.1 * rng.random_range(-1.0..1.0))
                            .collect()
                    })
                    .collect();
                Example {
                    features: FeatureMatrix::from_rows(rows, FeatureKind::Raw).unwrap(),
                    label,
                    source_id: format!("toy{i}"),
                    provenance: None,
                }
            })
            .collect()
    }

    #[test]
    fn config_invariants() {
        assert!(TrainConfig {
            epochs: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            lr: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            lr: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_lr_records_are_identical() {
        let data = toy(8, 1);
        let cfg = TrainConfig {
            epochs: 3,
            hidden: 4,
            ..Default::default()
        };
        let m = cfg.init_model(3).unwrap();
        let out = train_with_lr(m.clone(), &data, &data, &cfg, 0.0).unwrap();
        assert_eq!(out.model, m);
        let r0 = &out.records[0];
        for r in &out.records[1..] {
            assert_eq!(
                (r.train_loss, r.train_acc, r.val_loss, r.val_acc),
                (r0.train_loss, r0.train_acc, r0.val_loss, r0.val_acc)
            );
        }
    }

    #[test]
    fn deterministic_and_learns() {
        let data = toy(16, 2);
        let cfg = TrainConfig {
            epochs: 30,
            hidden: 8,
            lr: 0.1,
            ..Default::default()
        };
        let a = train(cfg.init_model(3).unwrap(), &data, &[], &cfg).unwrap();
        let b = train(cfg.init_model(3).unwrap(), &data, &[], &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.records.last().unwrap().train_loss < a.records[0].train_loss);
        assert_eq!(a.records.last().unwrap().val_loss, None);
        let eval = evaluate(&a.model, &data).unwrap();
        assert_eq!(eval.accuracy, a.records.last().unwrap().train_acc);
    }

    #[test]
    fn dimension_mismatch_and_empty() {
        let data = toy(4, 3);
        let cfg = TrainConfig {
            hidden: 2,
            epochs: 1,
            ..Default::default()
        };
        assert!(matches!(
            train(cfg.init_model(5).unwrap(), &data, &[], &cfg),
            Err(TrainerError::Nn(_))
        ));
        assert_eq!(
            train(cfg.init_model(3).unwrap(), &[], &[], &cfg),
            Err(TrainerError::Empty("training"))
        );
    }

    #[test]
    fn keep_best_and_clipping() {
        let data = toy(16, 4);
        let cfg = TrainConfig {
            epochs: 5,
            hidden: 4,
            lr: 0.5,
            keep_best: true,
            clip_norm: Some(0.5),
            ..Default::default()
        };
        let out = train(cfg.init_model(3).unwrap(), &data, &data, &cfg).unwrap();
        let best = out.best_epoch.unwrap();
        let top = out.records.iter().map(|r| r.val_acc.unwrap()).fold(0.0, f64::max);
        assert_eq!(out.records[best - 1].val_acc.unwrap(), top);
        assert_eq!(evaluate(&out.model, &data).unwrap().accuracy, top);
    }

    #[test]
    fn standardization_uses_train_statistics() {
        let mut tr = toy(8, 5);
        let mut te = toy(4, 6);
        let before = te[0].features.step(0)[0];
        let s = standardize_sets(&mut tr, &mut [&mut te]).unwrap();
        let after = te[0].features.step(0)[0];
        assert!((after - (before - s.mean()[0]) / s.scale()[0]).abs() < 1e-15);
    }
}
