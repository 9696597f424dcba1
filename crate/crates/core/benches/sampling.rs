use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use drlab::fixedpoint::{discover_fixed_points, IterateOptions};
use drlab::lab::scenario;
use drlab::regularity::{estimate_kappa, Neighborhood, NeighborhoodSpec};
use drlab::{Execution, Vector};

const POLICIES: [(&str, Execution); 2] =
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn kappa_sampling(c: &mut Criterion) {
    let s = scenario::separable_circles(1.0).unwrap();
    let problem = s.problem(0.5).unwrap();
    let reference = s.reference_point(0.5).unwrap().unwrap();
    let mut group = c.benchmark_group("kappa");
    for samples in [1_000usize, 10_000] {
        let spec = NeighborhoodSpec::new(Neighborhood::ball(reference.xbar.clone(), 0.1).unwrap())
            .with_samples(samples);
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, samples), &spec, |b, spec| {
                b.iter(|| {
                    estimate_kappa(&problem, &reference.gap, std::slice::from_ref(&reference.xbar), spec, exec).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn multistart(c: &mut Criterion) {
    let s = scenario::two_intersecting_circles(-1.5, 1.0).unwrap();
    let problem = s.problem(0.5).unwrap();
    let seeds: Vec<Vector> = (0..64)
        .map(|i| {
            let t = i as f64 / 64.0 * std::f64::consts::TAU;
            Vector::from([0.9 * t.cos(), -0.75 + 0.5 * t.sin()])
        })
        .collect();
    let opts = IterateOptions::default();
    let mut group = c.benchmark_group("multistart");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| discover_fixed_points(&problem, &seeds, &opts, 1e-6, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kappa_sampling, multistart);
criterion_main!(benches);
