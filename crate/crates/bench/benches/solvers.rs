use cheeger_bench::fixture;
use cheeger_core::estimators::fit_linear;
use cheeger_core::nn::{mlp_grad, mlp_init};
use cheeger_core::spectral::DEFAULT_TOLERANCE;
use cheeger_core::{cheeger_exact, cheeger_naive, generate_regular, spectrum, Sample, Seed};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("cheeger_exact");
    group.sample_size(10);
    for n in [12, 16, 20] {
        let g = fixture(n, 4);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| cheeger_exact(black_box(g)).unwrap())
        });
    }
    group.finish();

    let g = fixture(14, 4);
    c.bench_function("cheeger_naive/14", |b| {
        b.iter(|| cheeger_naive(black_box(&g)).unwrap())
    });
}

fn spectra(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectrum");
    for n in [12, 30, 64] {
        let g = fixture(n, 5 + n % 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| spectrum(black_box(g), DEFAULT_TOLERANCE).unwrap())
        });
    }
    group.finish();
}

fn generation(c: &mut Criterion) {
    let mut seed = 0;
    c.bench_function("generate_regular/30x5", |b| {
        b.iter(|| {
            seed += 1;
            generate_regular(30, 6, Seed::new(seed, 0)).unwrap()
        })
    });
}

fn estimators(c: &mut Criterion) {
    let samples: Vec<Sample> = (0..2000)
        .map(|i| {
            let l0 = (3 + i % 6) as f64;
            let l1 = l0 * 0.6 - (i % 7) as f64 * 0.1;
            Sample::new(vec![l0, l1], 0.5 * l0 - l1 / 3.0)
        })
        .collect();
    c.bench_function("fit_linear/2000x2", |b| {
        b.iter(|| fit_linear(black_box(&samples)).unwrap())
    });

    let model = mlp_init(&[2, 64, 64, 32, 16, 1], Seed::new(1, 0)).unwrap();
    c.bench_function("mlp_grad/batch128", |b| {
        b.iter(|| mlp_grad(black_box(&model), &samples[..128]).unwrap())
    });
}

criterion_group!(benches, exact, spectra, generation, estimators);
criterion_main!(benches);
