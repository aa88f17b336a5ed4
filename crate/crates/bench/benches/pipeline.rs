use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use respiro::augment::{convolutive_mixture, pitch_shift, time_stretch, MixtureSpec};
use respiro::dataset::PipelineConfig;
use respiro::features::{extract, fft_in_place, FeatureKind};
use respiro::linalg::Matrix;
use respiro::nn::{grad_check_with, loss_and_gradients, predict_proba, Direction, FdPrecision};
use respiro_bench::{features, model, tone};

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("fft");
    for n in [64usize, 256, 1024] {
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), 0.0)).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| {
                let mut buf = x.clone();
                fft_in_place(&mut buf).unwrap();
                black_box(buf)
            })
        });
    }
    g.finish();

    let clip = tone(3);
    let mut g = c.benchmark_group("features_1s");
    for kind in [FeatureKind::Mfcc, FeatureKind::Zcr, FeatureKind::Raw] {
        let cfg = PipelineConfig::for_kind(kind).features;
        g.bench_function(kind.as_str(), |b| b.iter(|| extract(black_box(&clip), &cfg).unwrap()));
    }
    g.finish();
}

fn network(c: &mut Criterion) {
    let xs = features(FeatureKind::Mfcc);
    let mut g = c.benchmark_group("network_mfcc_T98");
    for (dir, h) in [
        (Direction::Unidirectional, 32),
        (Direction::Bidirectional, 32),
        (Direction::Unidirectional, 128),
    ] {
        let m = model(xs.dim(), h, dir);
        g.bench_function(format!("forward_{dir}_H{h}"), |b| {
            b.iter(|| predict_proba(&m, black_box(&xs)).unwrap())
        });
        g.bench_function(format!("bptt_{dir}_H{h}"), |b| {
            b.iter(|| loss_and_gradients(&m, black_box(&xs), 2).unwrap())
        });
    }
    g.finish();

    let m = model(xs.dim(), 4, Direction::Bidirectional);
    let short = xs.prefix(5);
    let mut g = c.benchmark_group("gradcheck_bi_H4_T5");
    g.sample_size(10);
    for (name, p) in [("double", FdPrecision::Double), ("adaptive", FdPrecision::Adaptive)] {
        g.bench_function(name, |b| b.iter(|| grad_check_with(&m, &short, 1, 1e-5, p).unwrap()));
    }
    g.finish();
}

fn augmentation(c: &mut Criterion) {
    let clip = tone(1);
    let mut g = c.benchmark_group("augment_1s");
    g.bench_function("time_stretch_1.1", |b| {
        b.iter(|| time_stretch(black_box(&clip), 1.1).unwrap())
    });
    g.bench_function("pitch_shift_+2", |b| {
        b.iter(|| pitch_shift(black_box(&clip), 2.0).unwrap())
    });
    let sources = vec![tone(0), tone(4)];
    let taps = (0..5)
        .map(|k| Matrix::from_fn(2, 2, |r, s| 1.0 / (1 + k + r + s) as f64))
        .collect();
    let spec = MixtureSpec::new(taps, 0.01, 3).unwrap();
    g.bench_function("mixture_2x2_K5", |b| {
        b.iter(|| convolutive_mixture(black_box(&sources), &spec).unwrap())
    });
    g.finish();
}

criterion_group!(benches, spectral, network, augmentation);
criterion_main!(benches);
