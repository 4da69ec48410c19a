use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use radsurv::pipeline::{load_subject, make_synthetic_cohort, CohortData, PipelineConfig, SynthParams};
use radsurv::radiomics::extract_subject_features_with;
use radsurv::survival::{concordance_index_with, Outcome};
use radsurv::volume::{Geometry, Interpolation, ScalarVolume};
use radsurv::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_extraction(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let cohort = make_synthetic_cohort(dir.path(), 16, 1, &SynthParams::default()).unwrap();
    let config = PipelineConfig::with_blocks(false, true, false);
    let images = load_subject(&cohort.manifest.rows[0], &config).unwrap();

    let mut group = c.benchmark_group("extract_subject");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| extract_subject_features_with(black_box(&images), &config.radiomics, exec).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("cohort_features_16");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| CohortData::build(black_box(&cohort.manifest), &config, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_concordance(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut group = c.benchmark_group("concordance");
    for n in [1_000, 10_000] {
        let risk: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let outcomes: Vec<Outcome> = (0..n)
            .map(|_| Outcome::new(rng.random_range(1.0..2000.0), rng.random_bool(0.3)).unwrap())
            .collect();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| concordance_index_with(black_box(&risk), &outcomes, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_resample(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Geometry::new([64, 64, 64], [1.0, 1.0, 2.0], [0.0; 3]).unwrap();
    let volume = ScalarVolume::new(g, (0..g.len()).map(|_| rng.random_range(-100.0..100.0)).collect()).unwrap();
    let mut group = c.benchmark_group("resample_64");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| volume.resample_with([0.8, 0.8, 0.8], Interpolation::Trilinear, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_extraction, bench_concordance, bench_resample);
criterion_main!(benches);
