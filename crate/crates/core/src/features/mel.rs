//! Mel scale, triangular filterbank and the orthonormal type-II DCT.

use std::f64::consts::PI;

use crate::linalg::Matrix;

use super::{FeatureError, MfccConfig};

/// `m(f) = 2595 · log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// `n_mels × (n_fft/2 + 1)` matrix of triangular filters whose centers are
/// evenly spaced on the mel scale between `fmin` and `fmax`.
///
/// Filters are evaluated at bin center frequencies `k · sr / n_fft`. A filter
/// that covers no bin is a configuration error.
pub fn mel_filterbank(cfg: &MfccConfig, sample_rate: u32) -> Result<Matrix, FeatureError> {
    cfg.validate(sample_rate)?;
    let n_bins = cfg.n_fft / 2 + 1;
    let mel_lo = hz_to_mel(cfg.fmin);
    let mel_hi = hz_to_mel(cfg.upper_edge(sample_rate));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / cfg.n_fft as f64;

    let mut fb = Matrix::zeros(cfg.n_mels, n_bins);
    for m in 0..cfg.n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = fb.row_mut(m);
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            *w = if f > lo && f <= center {
                (f - lo) / (center - lo)
            } else if f > center && f < hi {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
        }
        if !row.iter().any(|&w| w > 0.0) {
            return Err(FeatureError::Config(format!(
                "mel filter {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin at n_fft {}",
                cfg.n_fft
            )));
        }
    }
    Ok(fb)
}

/// Orthonormal DCT-II matrix: `M[k][n] = s_k cos(π k (2n + 1) / 2N)`.
pub fn dct_matrix(n: usize) -> Matrix {
    let s0 = (1.0 / n as f64).sqrt();
    let sk = (2.0 / n as f64).sqrt();
    Matrix::from_fn(n, n, |k, i| {
        let s = if k == 0 { s0 } else { sk };
        s * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos()
    })
}

/// Orthonormal DCT-II of `x`.
pub fn dct_ii(x: &[f64]) -> Vec<f64> {
    dct_matrix(x.len()).matvec(x)
}

/// Inverse of [`dct_ii`] (the orthonormal DCT-III).
pub fn dct_iii(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    dct_matrix(x.len()).matvec_transpose_acc(x, &mut out);
    out
}
