//! Same workloads on the full rayon pool and on a single-thread pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use torus_toeplitz::factorization::{cone_factorize, FactorizationOptions};
use torus_toeplitz::harness::modulus_squared;
use torus_toeplitz::lattice::{ConeSpec, FrequencyPoint, PrimitiveVector, TriangleInstance};
use torus_toeplitz::par;
use torus_toeplitz::structured::{build_system, structured_trace, StructuredOptions};
use torus_toeplitz::symbol::{synthesize, FourierMap};
use torus_toeplitz::toeplitz::{assemble_toeplitz, logdet_and_trace};

fn tri(lambda: u32) -> TriangleInstance {
    TriangleInstance::new(PrimitiveVector::new(-1, 1).unwrap(), 2, lambda).unwrap()
}

fn running_symbol() -> FourierMap {
    let alpha = FourierMap::from_entries(
        [
            (FrequencyPoint::new(0, 0), Complex64::new(1.0, 0.0)),
            (FrequencyPoint::new(1, 0), Complex64::new(-0.5, 0.0)),
        ],
        false,
    );
    modulus_squared(&alpha)
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut sizes = vec![1];
    if all > 1 {
        sizes.push(all);
    }
    sizes
        .into_iter()
        .map(|n| {
            let label = if n == 1 { "sequential".to_string() } else { format!("parallel-{n}") };
            (label, rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap())
        })
        .collect()
}

fn dense_sweep(c: &mut Criterion) {
    let f = running_symbol();
    let lambdas = [4u32, 6, 8, 10];
    let mut group = c.benchmark_group("dense_sweep");
    group.sample_size(10);
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| {
                pool.install(|| {
                    par::map_slice(&lambdas, |&l| {
                        logdet_and_trace(&assemble_toeplitz(&f, &tri(l))).unwrap()
                    })
                })
            })
        });
    }
    group.finish();
}

fn structured(c: &mut Criterion) {
    let f = running_symbol();
    let g = synthesize(&f, 256).unwrap().map(|z| Complex64::new(z.re, 0.0));
    let cone = ConeSpec::from_points(FrequencyPoint::new(1, 0), FrequencyPoint::new(1, 1)).unwrap();
    let fact = cone_factorize(&g, &cone, &FactorizationOptions::default()).unwrap();
    let sys = build_system(&fact, &tri(3), &StructuredOptions::default()).unwrap();
    let mut group = c.benchmark_group("structured_trace");
    group.sample_size(10);
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| pool.install(|| structured_trace(&sys).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, dense_sweep, structured);
criterion_main!(benches);
