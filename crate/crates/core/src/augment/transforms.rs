use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::AugmentError;
use crate::audio::{extract_window, resample_linear, AudioClip, Padding};

fn clip_like(src: &AudioClip, samples: Vec<f64>) -> Result<AudioClip, AugmentError> {
    Ok(AudioClip::new(samples, src.sample_rate(), src.source_id())?)
}

/// Linear interpolation of `x` at fractional position `pos`, holding the last
/// sample past the end.
fn interp(x: &[f64], pos: f64) -> f64 {
    let i = pos.floor() as usize;
    if i + 1 >= x.len() {
        return x[x.len() - 1];
    }
    let (a, b) = (x[i], x[i + 1]);
    (a + (pos - i as f64) * (b - a)).clamp(a.min(b), a.max(b))
}

/// Plays the clip `rate` times faster: `round(N / rate)` samples, output
/// sample `j` read at input position `j · rate`. Pitch moves with speed.
pub fn time_stretch(clip: &AudioClip, rate: f64) -> Result<AudioClip, AugmentError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(AugmentError::Param(format!("stretch rate {rate} must be positive")));
    }
    if rate == 1.0 {
        return Ok(clip.clone());
    }
    let x = clip.samples();
    let len = (x.len() as f64 / rate).round() as usize;
    if len == 0 {
        return Err(AugmentError::Param(format!(
            "stretching {} samples by {rate} leaves none",
            x.len()
        )));
    }
    clip_like(clip, (0..len).map(|j| interp(x, j as f64 * rate)).collect())
}

/// Stretches `y` to exactly `n` samples without resampling its content.
///
/// Waveform-similarity overlap-add: periodic-Hann grains at 50% overlap (the
/// window pairs sum to one), each read from within `grain / 4` samples of its
/// nominal input position, at the offset that best continues the previous
/// grain.
fn ola_to_length(y: &[f64], n: usize, grain: usize) -> Vec<f64> {
    let half = grain / 2;
    let tol = (grain / 4) as isize;
    let w: Vec<f64> = (0..grain)
        .map(|t| 0.5 * (1.0 - (2.0 * PI * t as f64 / grain as f64).cos()))
        .collect();
    let at = |i: isize| {
        if i >= 0 && (i as usize) < y.len() {
            y[i as usize]
        } else {
            0.0
        }
    };
    let alpha = y.len() as f64 / n as f64;
    let mut out = vec![0.0; n];
    let mut prev: Option<isize> = None;
    for m in 0..n / half + 2 {
        let nominal = (m as f64 * half as f64 * alpha).round() as isize - half as isize;
        let start = match prev {
            None => nominal,
            Some(p) => {
                let natural = p + half as isize;
                let score = |s: isize| (0..grain as isize).map(|t| at(s + t) * at(natural + t)).sum::<f64>();
                let mut best = (nominal, f64::NEG_INFINITY);
                for d in -tol..=tol {
                    let c = score(nominal + d);
                    if c > best.1 {
                        best = (nominal + d, c);
                    }
                }
                best.0
            }
        };
        prev = Some(start);
        let out_start = (m * half) as isize - half as isize;
        for (t, &wt) in w.iter().enumerate() {
            let o = out_start + t as isize;
            if (0..n as isize).contains(&o) {
                out[o as usize] += wt * at(start + t as isize);
            }
        }
    }
    out
}

/// Shifts pitch by `semitones` and keeps the length at `N`: the clip is
/// sped up by `2^(semitones/12)` with [`time_stretch`], then overlap-added
/// back to `N` samples.
pub fn pitch_shift(clip: &AudioClip, semitones: f64) -> Result<AudioClip, AugmentError> {
    if !semitones.is_finite() {
        return Err(AugmentError::Param("semitones must be finite".into()));
    }
    if semitones == 0.0 {
        return Ok(clip.clone());
    }
    let n = clip.len();
    let factor = 2f64.powf(semitones / 12.0);
    let sped = time_stretch(clip, factor)?;
    let target = ((0.03 * clip.sample_rate() as f64) as usize).next_power_of_two();
    let mut grain = target.max(4);
    while grain > 4 && grain > n / 2 {
        grain /= 2;
    }
    clip_like(clip, ola_to_length(sped.samples(), n, grain))
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Standard normal noise of `len` samples from a seeded stream.
pub fn white_noise(len: usize, sample_rate: u32, seed: u64) -> Result<AudioClip, AugmentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(AudioClip::new(s, sample_rate, format!("white:{seed}"))?)
}

/// Adds background noise scaled so the signal-to-noise power ratio is
/// `snr_db`. Noise at another rate is resampled; shorter noise is tiled.
pub fn mix_background(clip: &AudioClip, noise: &AudioClip, snr_db: f64) -> Result<AudioClip, AugmentError> {
    if !snr_db.is_finite() {
        return Err(AugmentError::Param("snr_db must be finite".into()));
    }
    let noise = resample_linear(noise, clip.sample_rate())?;
    let x = clip.samples();
    let v: Vec<f64> = noise.samples().iter().copied().cycle().take(x.len()).collect();
    let (ps, pn) = (power(x), power(&v));
    if ps == 0.0 {
        return Err(AugmentError::ZeroPower("signal".into()));
    }
    if pn == 0.0 {
        return Err(AugmentError::ZeroPower("noise".into()));
    }
    let scale = (ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    clip_like(clip, x.iter().zip(&v).map(|(a, b)| a + scale * b).collect())
}

/// Memoryless compressor: levels above `threshold_db` dBFS have their excess
/// divided by `ratio`; signs are kept.
pub fn compress_dynamic_range(clip: &AudioClip, threshold_db: f64, ratio: f64) -> Result<AudioClip, AugmentError> {
    if !(threshold_db < 0.0) {
        return Err(AugmentError::Param(format!(
            "threshold {threshold_db} dB must be negative"
        )));
    }
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(AugmentError::Param(format!("ratio {ratio} must be >= 1")));
    }
    let t = 10f64.powf(threshold_db / 20.0);
    let curve = |x: f64| {
        let a = x.abs();
        if a <= t {
            x
        } else {
            x.signum() * t * (a / t).powf(1.0 / ratio)
        }
    };
    clip_like(clip, clip.samples().iter().map(|&x| curve(x)).collect())
}

/// Moves samples later by `round(offset_s · sr)` (earlier when negative),
/// rotating when `circular` and zero-filling otherwise.
pub fn time_shift(clip: &AudioClip, offset_s: f64, circular: bool) -> Result<AudioClip, AugmentError> {
    if !(offset_s.abs() < clip.duration_secs()) {
        return Err(AugmentError::Param(format!(
            "shift {offset_s} s must be shorter than the {} s clip",
            clip.duration_secs()
        )));
    }
    let x = clip.samples();
    let n = x.len() as isize;
    let k = (offset_s * clip.sample_rate() as f64).round() as isize;
    let out = (0..n)
        .map(|i| {
            let src = i - k;
            if circular {
                x[src.rem_euclid(n) as usize]
            } else if (0..n).contains(&src) {
                x[src as usize]
            } else {
                0.0
            }
        })
        .collect();
    clip_like(clip, out)
}

/// One [`extract_window`] per offset.
pub fn subsample_windows(
    clip: &AudioClip,
    offsets_s: &[f64],
    duration_s: f64,
    padding: Padding,
) -> Result<Vec<AudioClip>, AugmentError> {
    offsets_s
        .iter()
        .map(|&o| Ok(extract_window(clip, o, duration_s, padding)?))
        .collect()
}
