use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hkfp::particles::{ForceMethod, ParticleEnsemble};
use hkfp::{make_grid, Execution, InitialCondition, Kernel, Params};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel");
    for m in [1024usize, 4096] {
        let grid = make_grid(1.0, m).unwrap();
        let k = Kernel::new(grid, &Params::new(1.0, 0.5, 1.0).unwrap()).unwrap();
        let rho = InitialCondition::RandomDensity { seed: 1 }.build(grid).unwrap();
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(format!("direct/{name}"), m), &rho, |b, rho| {
                b.iter(|| k.apply_g_direct_with(rho, exec).unwrap())
            });
        }
        group.bench_with_input(BenchmarkId::new("fft", m), &rho, |b, rho| b.iter(|| k.apply_g_fft(rho).unwrap()));
    }
    group.finish();
}

fn particles(c: &mut Criterion) {
    let mut group = c.benchmark_group("particle_drift");
    group.sample_size(20);
    let grid = make_grid(1.0, 256).unwrap();
    let rho0 = InitialCondition::RandomDensity { seed: 2 }.build(grid).unwrap();
    for n in [2_000usize, 20_000] {
        let ens = ParticleEnsemble::sample(&rho0, n, 3).unwrap();
        for (name, exec) in POLICIES {
            for (method_name, method) in [("direct", ForceMethod::Direct), ("sorted", ForceMethod::Sorted)] {
                if method == ForceMethod::Direct && n > 2_000 {
                    continue;
                }
                group.bench_with_input(BenchmarkId::new(format!("{method_name}/{name}"), n), &ens, |b, ens| {
                    b.iter(|| ens.drift_with(0.3, method, exec))
                });
            }
        }
    }
    group.finish();
}

criterion_group!(benches, kernel, particles);
criterion_main!(benches);
