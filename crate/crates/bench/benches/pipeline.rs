use std::f64::consts::FRAC_PI_4;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qdecoh::relaxation::{GatingCase, OneQubitSetup};
use qdecoh::{
    build_hessian, closed_form_one_qubit, one_qubit_gated_moments, rate_one_qubit, slope_check, solve_modes,
    LatticeSpec, PhysicalParams, RateMode,
};
use qdecoh_bench::{calibrated_cube, models};

fn lattice(c: &mut Criterion) {
    let spec = calibrated_cube();
    c.bench_function("lattice 4x4x4 solve", |b| {
        b.iter(|| solve_modes(&build_hessian(black_box(&spec)).unwrap(), spec.ion_mass).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("slope_check");
    group.sample_size(10);
    for m in models(&[3, 6, 12]) {
        group.bench_with_input(BenchmarkId::from_parameter(m.dim()), &m, |b, m| b.iter(|| slope_check(m).unwrap()));
    }
    group.finish();
}

fn rate(c: &mut Criterion) {
    let p = PhysicalParams::default();
    let relax = closed_form_one_qubit(&p, &LatticeSpec::default(), &OneQubitSetup::default()).unwrap();
    let m = one_qubit_gated_moments(FRAC_PI_4, 0.0, p.omega_rabi[0], p.detuning_ci).unwrap();
    c.bench_function("one-qubit rate, N = 10^4", |b| {
        b.iter(|| rate_one_qubit(&p, GatingCase::Weak, &relax, black_box(&m), 10_000, RateMode::Table).unwrap())
    });
}

criterion_group!(benches, lattice, oracle, rate);
criterion_main!(benches);
