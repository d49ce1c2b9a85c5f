use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use cluster_gas::combinatorics::{phi_with, PhiMode};
use cluster_gas::ensemble::EnsembleSpec;
use cluster_gas::expansion::{NuOptions, PathSampler};
use cluster_gas::limits::{dsmc_run, DsmcOptions};
use cluster_gas::rng::{stream, Domain};
use cluster_gas::{InitialModel, SimpleGraph};

fn engine(c: &mut Criterion) {
    let mut g = c.benchmark_group("engine");
    for eps in [0.02, 0.01, 0.005] {
        let spec = EnsembleSpec::new(2, eps, 0.2, InitialModel::uniform(1.0), 1, 1);
        let config = spec.initial_config::<2>(0).unwrap();
        g.bench_function(format!("run_eps{eps}"), |b| {
            b.iter(|| cluster_gas::engine::run(&config, 0.2).unwrap())
        });
    }
    g.finish();
}

fn phi(c: &mut Criterion) {
    let mut g = c.benchmark_group("phi");
    for k in [6, 8, 10] {
        let complete = SimpleGraph::complete(k);
        g.bench_function(format!("complete_k{k}"), |b| {
            b.iter(|| phi_with(&complete, PhiMode::VertexSubsets).unwrap())
        });
    }
    g.finish();
}

fn reconstruct(c: &mut Criterion) {
    let mut g = c.benchmark_group("reconstruct");
    for n in [2, 4, 6] {
        let sampler = PathSampler::new(n, 0.01, 0.2, InitialModel::uniform(1.0), NuOptions::default()).unwrap();
        g.bench_function(format!("sample_n{n}"), |b| {
            b.iter_batched(
                || stream(7, Domain::Validation, n as u64),
                |mut rng| sampler.sample::<2>(&mut rng),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn dsmc(c: &mut Criterion) {
    let opts = DsmcOptions {
        particles: 20_000,
        horizon: 0.05,
        output_times: vec![0.05],
        ..DsmcOptions::default()
    };
    c.bench_function("dsmc_20k_5_steps", |b| {
        b.iter(|| dsmc_run::<2>(&InitialModel::uniform(1.0), &opts, 3).unwrap())
    });
}

criterion_group!(benches, engine, phi, reconstruct, dsmc);
criterion_main!(benches);
