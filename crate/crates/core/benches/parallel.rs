use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lakevortex::asymptotics::{run_sweep, DeltaSchedule, SweepConfig};
use lakevortex::elliptic::{assemble_operator, BoundaryFlux};
use lakevortex::exec::Exec;
use lakevortex::geometry::{build_lake, Lake};
use lakevortex::kernel::{upper_bound_test, KernelTestConfig};
use lakevortex::nonlinearity::VorticityFunction;
use lakevortex::oracle::brute_force_oracle;
use lakevortex::variational::{AdmissibleParams, Init, Problem, SolveOptions};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn oracle(c: &mut Criterion) {
    let lake = Arc::new(Lake::tiny_rect(2, 2, 0.5, Some(vec![1.0, 0.8, 0.9, 1.2])).unwrap());
    let op = assemble_operator(lake).unwrap();
    let q = op.solve_background(&BoundaryFlux::Zero).unwrap();
    let vf = VorticityFunction::Power { p: 2.0 };
    let params = AdmissibleParams { eps: 1.0, delta: 1.0, kappa0: 1.0, lambda: 4.0 };
    let pr = Problem::new(&op, &q, params, &vf).unwrap();
    let mut g = c.benchmark_group("oracle_4_cells");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| black_box(brute_force_oracle(&pr, 10, e).unwrap().energy))
        });
    }
    g.finish();
}

fn kernel_sampling(c: &mut Criterion) {
    let lake = build_lake("disk_constant_b", 32).unwrap();
    let cfg = KernelTestConfig { pairs: 1000, ..Default::default() };
    let mut g = c.benchmark_group("kernel_upper_bound");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| black_box(upper_bound_test(&lake, &cfg, e).unwrap().worst_slack))
        });
    }
    g.finish();
}

fn small_sweep(c: &mut Criterion) {
    let lake = Arc::new(build_lake("disk_interior_max_b", 48).unwrap());
    let op = assemble_operator(lake).unwrap();
    let q = op.solve_background(&BoundaryFlux::Cosine { amplitude: 0.015 }).unwrap();
    let vf = VorticityFunction::JumpLinear { c: 0.5 };
    let cfg = SweepConfig {
        schedule: DeltaSchedule::Critical,
        eps: vec![0.3, 0.25, 0.2],
        kappa0: 1.0,
        lambda: 50.0,
        target_radius: 0.2,
        init: Init::Point { at: [0.0, 0.2] },
        options: SolveOptions::default(),
    };
    let mut g = c.benchmark_group("sweep_48");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| black_box(run_sweep(&op, &q, &vf, &cfg, e).unwrap().summary.failed_points))
        });
    }
    g.finish();
}

criterion_group!(benches, oracle, kernel_sampling, small_sweep);
criterion_main!(benches);
