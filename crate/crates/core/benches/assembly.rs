use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use goafem::estimators::{estimate_residual, Residual};
use goafem::fespace::{assemble_stiffness, Diffusion, FeSpace};
use goafem::mesh::Triangulation;
use goafem::par::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn stiffness(c: &mut Criterion) {
    let mut group = c.benchmark_group("stiffness");
    group.sample_size(20);
    for p in [1, 3] {
        let space = FeSpace::new(Triangulation::l_shape().uniform_refine(8), p).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, format!("p{p}")), &space, |b, s| {
                b.iter(|| assemble_stiffness(s, &Diffusion::Identity, exec))
            });
        }
    }
    group.finish();
}

fn estimator(c: &mut Criterion) {
    let mut group = c.benchmark_group("residual_estimator");
    group.sample_size(20);
    for p in [1, 3] {
        let space = FeSpace::new(Triangulation::l_shape().uniform_refine(8), p).unwrap();
        let u = space.interpolate(|x| (x[0] * x[1]).sin()).into_coefficients();
        let form = Residual::poisson(|x| x[0].exp(), true);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, format!("p{p}")), &space, |b, s| {
                b.iter(|| estimate_residual(s, &[&u], &form, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, stiffness, estimator);
criterion_main!(benches);
