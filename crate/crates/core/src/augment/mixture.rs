use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::AugmentError;
use crate::audio::AudioClip;
use crate::linalg::Matrix;

/// FIR mixing model `x(n) = Σ_k A_k s(n − k) + v(n)` with `K` taps of shape
/// `M × S` and i.i.d. Gaussian `v(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub taps: Vec<Matrix>,
    pub noise_std: f64,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn new(taps: Vec<Matrix>, noise_std: f64, seed: u64) -> Result<Self, AugmentError> {
        let spec = Self { taps, noise_std, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let first = self
            .taps
            .first()
            .ok_or_else(|| AugmentError::Shape("mixture needs K >= 1 taps".into()))?;
        if first.rows() == 0 || first.cols() == 0 {
            return Err(AugmentError::Shape("tap matrices must be non-empty".into()));
        }
        if let Some(k) = self.taps.iter().position(|a| a.shape() != first.shape()) {
            return Err(AugmentError::Shape(format!(
                "tap {k} is {:?}, tap 0 is {:?}",
                self.taps[k].shape(),
                first.shape()
            )));
        }
        if self.taps.iter().any(|a| !a.is_finite()) {
            return Err(AugmentError::Shape("tap entries must be finite".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(AugmentError::Param(format!(
                "noise_std {} must be >= 0",
                self.noise_std
            )));
        }
        Ok(())
    }

    pub fn outputs(&self) -> usize {
        self.taps[0].rows()
    }

    pub fn sources(&self) -> usize {
        self.taps[0].cols()
    }
}

/// Mixes `S` equal-length sources into `M` observed channels. Each channel is
/// a sum of per-source FIR filters; noise samples are drawn time-major
/// (`n` outer, channel inner) from the seeded stream.
pub fn convolutive_mixture(sources: &[AudioClip], spec: &MixtureSpec) -> Result<Vec<AudioClip>, AugmentError> {
    spec.validate()?;
    if sources.len() != spec.sources() {
        return Err(AugmentError::Shape(format!(
            "{} sources for taps with {} columns",
            sources.len(),
            spec.sources()
        )));
    }
    let n = sources[0].len();
    let sr = sources[0].sample_rate();
    if sources.iter().any(|s| s.len() != n || s.sample_rate() != sr) {
        return Err(AugmentError::Shape("sources must share length and sample rate".into()));
    }
    let mut out = vec![vec![0.0; n]; spec.outputs()];
    for (m, x) in out.iter_mut().enumerate() {
        for (s, src) in sources.iter().enumerate() {
            let h: Vec<f64> = spec.taps.iter().map(|a| a[(m, s)]).collect();
            let src = src.samples();
            for (k, &hk) in h.iter().enumerate() {
                if hk == 0.0 {
                    continue;
                }
                for (xn, &sv) in x[k.min(n)..].iter_mut().zip(src) {
                    *xn += hk * sv;
                }
            }
        }
    }
    if spec.noise_std > 0.0 {
        let normal = Normal::new(0.0, spec.noise_std).map_err(|e| AugmentError::Param(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for t in 0..n {
            for x in out.iter_mut() {
                x[t] += normal.sample(&mut rng);
            }
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(m, x)| Ok(AudioClip::new(x, sr, format!("mix:{m}"))?))
        .collect()
}
