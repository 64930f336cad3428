use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use varreg::solver::energy_gradient;
use varreg::{minimize, Lagrangian, Mask, Method, SolveOptions};
use varreg_bench::{problem, solved};

fn solves(c: &mut Criterion) {
    let mut g = c.benchmark_group("minimize");
    g.sample_size(10);
    let cases = [
        ("quadratic", Lagrangian::quadratic(2).unwrap(), "x^2-y^2"),
        ("minimal-surface", Lagrangian::minimal_surface(2).unwrap(), "x*y+0.3*x"),
        ("p-laplace-4", Lagrangian::p_laplace(2, 4.0).unwrap(), "x^2-y^2"),
        ("congestion", Lagrangian::congestion(2).unwrap(), "x"),
    ];
    for (name, f, bc) in &cases {
        for res in [33, 65] {
            let (grid, b) = problem(res, Mask::Square, bc);
            g.bench_with_input(BenchmarkId::new(*name, res), &res, |bench, _| {
                bench.iter(|| minimize(f, &grid, &b, &SolveOptions::default()).unwrap())
            });
        }
    }
    let f = Lagrangian::minimal_surface(2).unwrap();
    let (grid, b) = problem(33, Mask::Square, "x*y+0.3*x");
    let opts = SolveOptions { method: Method::GradientDescent, max_iters: 2000, ..SolveOptions::default() };
    g.bench_function("minimal-surface/gradient-descent/33", |bench| bench.iter(|| minimize(&f, &grid, &b, &opts).unwrap()));
    g.finish();
}

fn gradient_eval(c: &mut Criterion) {
    let f = Lagrangian::minimal_surface(2).unwrap();
    let u = solved(&f, 129, "x*y+0.3*x");
    c.bench_function("energy_gradient/minimal-surface/129", |bench| bench.iter(|| energy_gradient(&f, &u).unwrap()));
}

criterion_group!(benches, solves, gradient_eval);
criterion_main!(benches);
