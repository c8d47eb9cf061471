use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mealscope_bench::{bite_run, probability_trace, recording, DAY_S, FS};
use mealscope_core::pipeline::{bite_probabilities, prepare};
use mealscope_core::{
    detect_bites, localize_meals, BiteDetectConfig, LocalizerConfig, ModelParams, NetConfig, PreprocessConfig,
};

fn preprocess(c: &mut Criterion) {
    let mut group = c.benchmark_group("preprocess");
    let cfg = PreprocessConfig::for_sample_rate(FS);
    for minutes in [1.0, 10.0] {
        let rec = recording(minutes * 60.0);
        group.throughput(Throughput::Elements(rec.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(format!("{minutes}min")), &rec, |b, rec| {
            b.iter(|| prepare(black_box(rec), &cfg).unwrap())
        });
    }
    group.finish();
}

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_sequence");
    group.sample_size(10);
    let rec = prepare(&recording(60.0), &PreprocessConfig::for_sample_rate(FS)).unwrap();
    group.throughput(Throughput::Elements(rec.len() as u64));
    for (name, cfg) in [
        ("small", NetConfig::with_widths([8, 16, 32], 32)),
        ("full", NetConfig::default()),
    ] {
        let f32_params = ModelParams::<f32>::init(&cfg, 0).unwrap();
        group.bench_function(BenchmarkId::new(name, "f32"), |b| {
            b.iter(|| bite_probabilities(&f32_params, black_box(&rec)).unwrap())
        });
        let f64_params = f32_params.cast::<f64>();
        group.bench_function(BenchmarkId::new(name, "f64"), |b| {
            b.iter(|| bite_probabilities(&f64_params, black_box(&rec)).unwrap())
        });
    }
    group.finish();
}

fn detect(c: &mut Criterion) {
    let p = probability_trace(DAY_S);
    let cfg = BiteDetectConfig::default();
    let mut group = c.benchmark_group("detect_bites");
    group.throughput(Throughput::Elements(p.len() as u64));
    group.bench_function("day", |b| b.iter(|| detect_bites(black_box(&p), FS, &cfg).unwrap()));
    group.finish();
}

fn localize(c: &mut Criterion) {
    let bites = bite_run(5_000.0, 120);
    let cfg = LocalizerConfig::default();
    let mut group = c.benchmark_group("localize_meals");
    group.sample_size(20);
    group.bench_function("day", |b| {
        b.iter(|| localize_meals(black_box(&bites), DAY_S, FS, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, preprocess, forward, detect, localize);
criterion_main!(benches);
