use super::{FeatureError, FeatureMatrix};

/// Per-dimension z-scoring with statistics fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

/// Dimensions whose spread falls below this are centered but not scaled.
const MIN_STD: f64 = 1e-12;

impl Standardizer {
    /// Mean and population standard deviation over every frame of every matrix.
    pub fn fit<'a>(data: impl IntoIterator<Item = &'a FeatureMatrix>) -> Result<Self, FeatureError> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for m in data {
            if sum.is_empty() {
                sum = vec![0.0; m.dim()];
                sq = vec![0.0; m.dim()];
            } else if m.dim() != sum.len() {
                return Err(FeatureError::Config(format!(
                    "cannot fit across feature dims {} and {}",
                    sum.len(),
                    m.dim()
                )));
            }
            for t in 0..m.steps() {
                for (j, &v) in m.step(t).iter().enumerate() {
                    sum[j] += v;
                    sq[j] += v * v;
                }
            }
            count += m.steps();
        }
        if count == 0 {
            return Err(FeatureError::Config("cannot fit a standardizer on no frames".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, mu)| {
                let sd = (q / n - mu * mu).max(0.0).sqrt();
                if sd > MIN_STD {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn from_parts(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self, FeatureError> {
        if mean.len() != scale.len() || mean.is_empty() {
            return Err(FeatureError::Config("standardizer mean/scale length mismatch".into()));
        }
        if mean.iter().chain(&scale).any(|v| !v.is_finite()) || scale.iter().any(|&s| s <= 0.0) {
            return Err(FeatureError::Config(
                "standardizer needs finite means and positive scales".into(),
            ));
        }
        Ok(Self { mean, scale })
    }

    /// Identity transform of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn apply(&self, m: &mut FeatureMatrix) -> Result<(), FeatureError> {
        if m.dim() != self.dim() {
            return Err(FeatureError::Config(format!(
                "standardizer dim {} does not match features of dim {}",
                self.dim(),
                m.dim()
            )));
        }
        m.map_rows(|row| {
            for ((v, mu), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - mu) / s;
            }
        });
        Ok(())
    }
}
