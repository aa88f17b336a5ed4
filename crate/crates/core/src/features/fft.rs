//! Iterative radix-2 decimation-in-time FFT and the windowed power spectrum.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::FeatureError;

/// In-place forward DFT, `X_k = Σ x_n e^{-2πi kn/N}`. `N` must be a power of two.
pub fn fft_in_place(buf: &mut [Complex64]) -> Result<(), FeatureError> {
    let n = buf.len();
    if !n.is_power_of_two() {
        return Err(FeatureError::Config(format!("FFT size {n} is not a power of two")));
    }
    if n == 1 {
        return Ok(());
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        let twiddles: Vec<Complex64> = (0..half).map(|k| Complex64::from_polar(1.0, step * k as f64)).collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
    Ok(())
}

/// Analysis window applied before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Symmetric window coefficients of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann if len <= 1 => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (len - 1) as f64).cos())
                .collect(),
        }
    }
}

/// `|X_k|²` for `k = 0..=n_fft/2` of the windowed, zero-padded frame.
pub fn power_spectrum(frame: &[f64], n_fft: usize, window: Window) -> Result<Vec<f64>, FeatureError> {
    if !n_fft.is_power_of_two() {
        return Err(FeatureError::Config(format!("n_fft {n_fft} is not a power of two")));
    }
    if frame.len() > n_fft {
        return Err(FeatureError::Config(format!(
            "frame of {} samples does not fit n_fft {n_fft}",
            frame.len()
        )));
    }
    let w = window.coefficients(frame.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for (b, (x, wi)) in buf.iter_mut().zip(frame.iter().zip(&w)) {
        b.re = x * wi;
    }
    fft_in_place(&mut buf)?;
    Ok(buf[..=n_fft / 2].iter().map(|c| c.norm_sqr()).collect())
}

/// Hann-windowed power spectrum.
pub fn dft_power_spectrum(frame: &[f64], n_fft: usize) -> Result<Vec<f64>, FeatureError> {
    power_spectrum(frame, n_fft, Window::Hann)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let ang = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                        v * Complex64::new(ang.cos(), ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_all_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for bits in 0..=9 {
            let n = 1 << bits;
            let x: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let expect = naive_dft(&x);
            let mut got = x.clone();
            fft_in_place(&mut got).unwrap();
            let err = got.iter().zip(&expect).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-9, "n={n} err={err}");
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut buf = vec![Complex64::new(0.0, 0.0); 12];
        assert!(fft_in_place(&mut buf).is_err());
        assert!(dft_power_spectrum(&[0.0; 4], 12).is_err());
    }

    #[test]
    fn zero_frame_zero_spectrum() {
        let p = dft_power_spectrum(&[0.0; 100], 128).unwrap();
        assert_eq!(p.len(), 65);
        assert!(p.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bin_cosine_concentrates_energy() {
        let n = 64;
        let k0 = 5;
        let frame: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * k0 as f64 * i as f64 / n as f64).cos())
            .collect();
        let p = power_spectrum(&frame, n, Window::Rectangular).unwrap();
        // |X_k0| = N/2
        assert!((p[k0] - (n as f64 / 2.0).powi(2)).abs() < 1e-9);
        for (k, &v) in p.iter().enumerate() {
            if k != k0 {
                assert!(v < 1e-9, "bin {k} = {v}");
            }
        }
    }
}
