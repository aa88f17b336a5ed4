use rayon::prelude::*;

use super::{EpochRecord, TrainerError};
use crate::dataset::{ClassDistribution, Diagnosis, Example};
use crate::features::FeatureMatrix;
use crate::nn::{cross_entropy, predict_proba, ModelParams};
use crate::NUM_CLASSES;

/// Confusion matrix (rows = true class, columns = predicted) and derived
/// metrics. Precision and recall are `None` for classes whose denominator is
/// zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub precision: [Option<f64>; NUM_CLASSES],
    pub recall: [Option<f64>; NUM_CLASSES],
    pub n_examples: usize,
    pub mean_loss: f64,
}

impl EvalReport {
    /// Builds the report from class codes; `losses` feeds `mean_loss` (NaN when absent).
    pub fn from_predictions(
        truth: &[usize],
        predicted: &[usize],
        losses: Option<&[f64]>,
    ) -> Result<Self, TrainerError> {
        if truth.is_empty() {
            return Err(TrainerError::Empty("evaluation"));
        }
        if truth.len() != predicted.len() || losses.is_some_and(|l| l.len() != truth.len()) {
            return Err(TrainerError::Config("prediction and label counts differ".into()));
        }
        let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= NUM_CLASSES || p >= NUM_CLASSES {
                return Err(TrainerError::Config(format!("class code {} out of range", t.max(p))));
            }
            confusion[t][p] += 1;
        }
        let n = truth.len();
        let correct: usize = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let precision =
            std::array::from_fn(|c| ratio(confusion[c][c], (0..NUM_CLASSES).map(|r| confusion[r][c]).sum()));
        let recall = std::array::from_fn(|c| ratio(confusion[c][c], confusion[c].iter().sum()));
        let mean_loss = losses.map_or(f64::NAN, |l| l.iter().sum::<f64>() / n as f64);
        Ok(Self {
            accuracy: correct as f64 / n as f64,
            confusion,
            precision,
            recall,
            n_examples: n,
            mean_loss,
        })
    }

    /// Number of examples whose true class is `c`.
    pub fn support(&self, c: usize) -> usize {
        self.confusion[c].iter().sum()
    }
}

/// Class probabilities and the argmax class; ties go to the lowest index.
pub fn predict(model: &ModelParams, features: &FeatureMatrix) -> Result<(Vec<f64>, usize), TrainerError> {
    let p = predict_proba(model, features)?;
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    Ok((p, best))
}

/// Forward passes run in parallel; results are reduced in example order.
pub fn evaluate(model: &ModelParams, examples: &[Example]) -> Result<EvalReport, TrainerError> {
    if examples.is_empty() {
        return Err(TrainerError::Empty("evaluation"));
    }
    let outputs: Vec<(f64, usize)> = examples
        .par_iter()
        .map(|ex| {
            let (p, k) = predict(model, &ex.features)?;
            Ok((cross_entropy(&p, ex.label.code()), k))
        })
        .collect::<Result<_, TrainerError>>()?;
    let truth: Vec<usize> = examples.iter().map(|e| e.label.code()).collect();
    let predicted: Vec<usize> = outputs.iter().map(|o| o.1).collect();
    let losses: Vec<f64> = outputs.iter().map(|o| o.0).collect();
    EvalReport::from_predictions(&truth, &predicted, Some(&losses))
}

/// Accuracy of uniform random guessing, `1 / n_classes`.
pub fn chance_baseline(n_classes: usize) -> Result<f64, TrainerError> {
    if n_classes == 0 {
        return Err(TrainerError::Config("need at least one class".into()));
    }
    Ok(1.0 / n_classes as f64)
}

/// Accuracy of always predicting the modal class.
pub fn majority_baseline(labels: &[Diagnosis]) -> Result<f64, TrainerError> {
    ClassDistribution::from_labels(labels.iter().copied())
        .map(|d| d.majority_fraction())
        .map_err(|_| TrainerError::Empty("baseline"))
}

/// Minimum validation-loss decrease that counts as improvement.
pub const PLATEAU_MIN_DELTA: f64 = 1e-4;

/// Epoch of the last improvement once validation loss has failed to improve
/// by more than [`PLATEAU_MIN_DELTA`] for `patience` consecutive epochs.
/// Records without a validation loss are ignored.
pub fn plateau_detector(records: &[EpochRecord], patience: usize) -> Option<usize> {
    let patience = patience.max(1);
    let mut it = records.iter().filter_map(|r| r.val_loss.map(|l| (r.epoch, l)));
    let (mut best_epoch, mut best) = it.next()?;
    let mut stale = 0;
    for (epoch, loss) in it {
        if loss < best - PLATEAU_MIN_DELTA {
            best = loss;
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= patience {
                return Some(best_epoch);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use Diagnosis::*;

    fn rec(epoch: usize, val: f64) -> EpochRecord {
        EpochRecord {
            epoch,
            train_loss: 1.0,
            train_acc: 0.5,
            val_loss: Some(val),
            val_acc: Some(0.5),
        }
    }

    #[test]
    fn perfect_predictions() {
        let t = [0, 1, 2, 2, 7];
        let r = EvalReport::from_predictions(&t, &t, None).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for c in 0..8 {
            for k in 0..8 {
                if c != k {
                    assert_eq!(r.confusion[c][k], 0);
                }
            }
        }
        assert_eq!(r.recall[2], Some(1.0));
        assert_eq!(r.recall[3], None);
        assert_eq!(r.precision[3], None);
    }

    #[test]
    fn constant_predictor_equals_majority_baseline() {
        let labels = [Copd, Copd, Healthy, Urti, Copd, Asthma, Copd];
        let truth: Vec<usize> = labels.iter().map(|d| d.code()).collect();
        let r = EvalReport::from_predictions(&truth, &vec![Copd.code(); labels.len()], None).unwrap();
        assert_eq!(r.accuracy, majority_baseline(&labels).unwrap());
        assert_eq!(majority_baseline(&[Copd, Copd, Healthy]).unwrap(), 2.0 / 3.0);
        assert_eq!(r.precision[Copd.code()], Some(4.0 / 7.0));
        assert_eq!(r.precision[Healthy.code()], None);
        assert_eq!(r.recall[Healthy.code()], Some(0.0));
        assert_eq!(r.support(Copd.code()), 4);
    }

    #[test]
    fn baselines() {
        assert_eq!(chance_baseline(8).unwrap(), 0.125);
        assert_eq!(chance_baseline(1).unwrap(), 1.0);
        assert_eq!(chance_baseline(2).unwrap(), 0.5);
        assert!(chance_baseline(0).is_err());
        assert!(majority_baseline(&[]).is_err());
        assert_eq!(majority_baseline(&Diagnosis::ALL).unwrap(), 0.125);
    }

    #[test]
    fn plateau_cases() {
        let dec: Vec<_> = (1..=6).map(|e| rec(e, 1.0 / e as f64)).collect();
        assert_eq!(plateau_detector(&dec, 2), None);
        let flat: Vec<_> = [1.0, 0.5, 0.5, 0.5]
            .iter()
            .enumerate()
            .map(|(i, &l)| rec(i + 1, l))
            .collect();
        assert_eq!(plateau_detector(&flat, 2), Some(2));
        assert_eq!(plateau_detector(&flat, 3), None);
        assert_eq!(plateau_detector(&flat[..1], 1), None);
        assert_eq!(plateau_detector(&[], 1), None);
    }

    #[test]
    fn input_errors() {
        assert!(EvalReport::from_predictions(&[], &[], None).is_err());
        assert!(EvalReport::from_predictions(&[0], &[0, 1], None).is_err());
        assert!(EvalReport::from_predictions(&[8], &[0], None).is_err());
    }
}
