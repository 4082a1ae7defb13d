//! Benchmarks for the three hot paths of a sweep cell: drawing the frozen
//! feature bank, assembling the collocation system, and the direct solve.
//! Sizes track the default experiment grids (width up to 500, a few
//! thousand collocation points), so regressions here translate directly
//! into slower sweeps.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rfpinn::{
    assemble, empirical_loss, eval_all, pgd, ridge, sample, sample_collocation, ActivationKind,
    EllipticProblem, PgdConfig, PriorSpec, StepRule,
};
use rfpinn_bench::{bench_bank, bench_system, BENCH_SEED};
use std::hint::black_box;

fn bench_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample");
    for &m in &[1_000usize, 10_000] {
        group.throughput(Throughput::Elements(m as u64));
        let compact = PriorSpec::compact(4.0, 2).expect("compact prior");
        group.bench_with_input(BenchmarkId::new("compact-d2", m), &m, |b, &m| {
            b.iter(|| sample(black_box(&compact), m, BENCH_SEED).expect("bank samples"))
        });
        let heavy = PriorSpec::heavy_tail(7.0, 2.0, 2).expect("heavy-tail prior");
        group.bench_with_input(BenchmarkId::new("heavytail-d2", m), &m, |b, &m| {
            b.iter(|| sample(black_box(&heavy), m, BENCH_SEED).expect("bank samples"))
        });
    }
    group.finish();
}

fn bench_activations(c: &mut Criterion) {
    let mut group = c.benchmark_group("activation");
    let ts: Vec<f64> = (0..1024).map(|i| -3.0 + 6.0 * i as f64 / 1023.0).collect();
    for kind in [
        ActivationKind::Spline34,
        ActivationKind::SigDiff,
        ActivationKind::TanhDiff,
    ] {
        group.throughput(Throughput::Elements(ts.len() as u64));
        group.bench_function(format!("{kind:?}"), |b| {
            b.iter(|| {
                let mut acc = 0.0;
                for &t in &ts {
                    let (s0, s1, s2) = eval_all(kind, black_box(t));
                    acc += s0 + s1 + s2;
                }
                black_box(acc)
            })
        });
    }
    group.finish();
}

fn bench_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    group.sample_size(20);
    let problem = EllipticProblem::poisson1d();
    for &(m, n) in &[(100usize, 1_000usize), (500, 2_000)] {
        let bank = bench_bank(m, 1);
        let colloc = sample_collocation(&problem, n, BENCH_SEED + 1).expect("collocation samples");
        group.throughput(Throughput::Elements((m * n) as u64));
        group.bench_function(BenchmarkId::from_parameter(format!("m{m}-n{n}")), |b| {
            b.iter(|| {
                assemble(
                    black_box(&problem),
                    black_box(&bank),
                    black_box(&colloc),
                    ActivationKind::Spline34,
                    1.0,
                )
                .expect("system assembles")
            })
        });
    }
    group.finish();
}

fn bench_solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(20);
    for &(m, n) in &[(100usize, 1_000usize), (300, 2_000)] {
        let system = bench_system(m, n);
        group.bench_function(BenchmarkId::new("ridge", format!("m{m}-n{n}")), |b| {
            b.iter(|| ridge(black_box(&system)).expect("ridge solves"))
        });
        group.bench_function(BenchmarkId::new("pgd-100-steps", format!("m{m}-n{n}")), |b| {
            b.iter(|| {
                pgd(
                    black_box(&system),
                    &PgdConfig {
                        radius: Some(10.0),
                        iterations: 100,
                        step: StepRule::InverseSmoothness,
                    },
                )
                .expect("pgd runs")
            })
        });
        let reference = ridge(&system).expect("ridge solves").coefficients;
        group.bench_function(BenchmarkId::new("loss-eval", format!("m{m}-n{n}")), |b| {
            b.iter(|| empirical_loss(black_box(&system), black_box(&reference)).expect("loss"))
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_sampling,
    bench_activations,
    bench_assembly,
    bench_solvers
);
criterion_main!(benches);
