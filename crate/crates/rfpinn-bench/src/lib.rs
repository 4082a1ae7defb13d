//! Shared fixtures for the benchmark targets: deterministic banks,
//! collocation sets, and assembled systems at desk-scale sizes.

use rfpinn::{
    assemble, sample, sample_collocation, ActivationKind, AssembledSystem, EllipticProblem,
    FeatureBank, PriorSpec,
};

pub const BENCH_SEED: u64 = 1_234;

pub fn bench_bank(m: usize, d: usize) -> FeatureBank {
    let prior = PriorSpec::compact(4.0, d).expect("compact prior");
    sample(&prior, m, BENCH_SEED).expect("bank samples")
}

pub fn bench_system(m: usize, n: usize) -> AssembledSystem {
    let problem = EllipticProblem::poisson1d();
    let bank = bench_bank(m, 1);
    let colloc = sample_collocation(&problem, n, BENCH_SEED + 1).expect("collocation samples");
    assemble(&problem, &bank, &colloc, ActivationKind::Spline34, 1.0).expect("system assembles")
}
