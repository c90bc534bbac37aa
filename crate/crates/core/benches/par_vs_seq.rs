use std::hint::black_box;
use std::path::Path;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tamecert::certify::{
    check_ce, check_thm1, injectivity_probe, sample_jacobians, CheckOptions, SampleStrategy,
};
use tamecert::{parse_map, Exec, PiecewiseMap};

fn corpus(name: &str) -> PiecewiseMap {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name);
    parse_map(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_jacobians");
    for name in ["cubic.tmap", "kernel3d.tmap"] {
        let f = corpus(name);
        for (mode, exec) in MODES {
            let st = SampleStrategy {
                random: 2000,
                exec,
                ..SampleStrategy::default()
            };
            g.bench_with_input(BenchmarkId::new(mode, name), &st, |b, st| {
                b.iter(|| sample_jacobians(black_box(&f), st).unwrap())
            });
        }
    }
    g.finish();
}

fn checkers(c: &mut Criterion) {
    let mut g = c.benchmark_group("checkers");
    g.sample_size(10).measurement_time(Duration::from_secs(10));
    for name in ["cubic.tmap", "threesheet.tmap"] {
        let f = corpus(name);
        let s = sample_jacobians(&f, &SampleStrategy::default()).unwrap();
        for (mode, exec) in MODES {
            let opts = CheckOptions {
                exec,
                ..CheckOptions::default()
            };
            g.bench_function(BenchmarkId::new(format!("thm1/{mode}"), name), |b| {
                b.iter(|| check_thm1(&f, black_box(&s), &opts))
            });
            g.bench_function(BenchmarkId::new(format!("ce/{mode}"), name), |b| {
                b.iter(|| check_ce(black_box(&s), &opts))
            });
            g.bench_function(BenchmarkId::new(format!("probe/{mode}"), name), |b| {
                b.iter(|| injectivity_probe(black_box(&f), &opts))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, sampling, checkers);
criterion_main!(benches);
