//! Hot-path benchmarks: one derivative solve per route, the connection
//! construction, and a short trajectory.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use hdp_core::{
    ball_hocs, build_gnc, default_initial, exp_so3, full_vector_field, integrate, reduce_trivial,
    solve_reduced_step, BallParams, IntegratorConfig, LyapunovSpec, Vec3,
};

fn bench_algebra(c: &mut Criterion) {
    let v = Vec3::new(0.3, -0.2, 0.7);
    c.bench_function("exp_so3", |b| b.iter(|| exp_so3(black_box(&v))));
    let r = exp_so3(&v);
    c.bench_function("orthonormalize", |b| {
        b.iter(|| hdp_core::orthonormalize(black_box(r.matrix())).unwrap())
    });
}

fn bench_connection(c: &mut Criterion) {
    let p = BallParams::default();
    let lyap = LyapunovSpec::defaults(&p);
    let sc = ball_hocs(&p, &lyap).unwrap();
    let zeta = reduce_trivial(&default_initial(&p));
    c.bench_function("build_gnc (ball)", |b| {
        b.iter(|| build_gnc(black_box(&sc.problem.dist), &sc.problem.metric, &zeta).unwrap())
    });
}

fn bench_solvers(c: &mut Criterion) {
    let p = BallParams::default();
    let lyap = LyapunovSpec::defaults(&p);
    let sc = ball_hocs(&p, &lyap).unwrap();
    let s0 = default_initial(&p);
    let red = reduce_trivial(&s0);
    c.bench_function("full_vector_field (ball_hocs)", |b| {
        b.iter(|| full_vector_field(black_box(&sc.dynamics), &s0).unwrap())
    });
    c.bench_function("solve_reduced_step (ball_hocs)", |b| {
        b.iter(|| solve_reduced_step(black_box(&sc.problem), &red, &red).unwrap())
    });
}

fn bench_trajectory(c: &mut Criterion) {
    let p = BallParams::default();
    let lyap = LyapunovSpec::defaults(&p);
    let sc = ball_hocs(&p, &lyap).unwrap();
    let s0 = reduce_trivial(&default_initial(&p));
    let cfg = IntegratorConfig::new(1e-3, 0.02).unwrap();
    c.bench_function("reduced trajectory (20 rk4 steps)", |b| {
        b.iter(|| {
            integrate(
                hdp_core::scenarios::reduced_field(&sc),
                black_box(&s0),
                &cfg,
                &hdp_core::scenarios::reduced_hooks(&sc),
            )
            .into_result()
            .unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_algebra,
    bench_connection,
    bench_solvers,
    bench_trajectory
);
criterion_main!(benches);
