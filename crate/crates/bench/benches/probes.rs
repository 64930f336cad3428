use criterion::{criterion_group, criterion_main, Criterion};
use varreg::degiorgi::{geometric_threshold, seq_lemma_quadratic, v_profile};
use varreg::hedgehog::{four_d_example, hedgehog_cloud, normal_correspondence_check};
use varreg::probe::{courant_lebesgue_check, dyadic_radii, gradient_cloud, holder_fit};
use varreg::{Grid, Lagrangian, Mask, ScalarField};
use varreg_bench::solved;

fn field_probes(c: &mut Criterion) {
    let u = solved(&Lagrangian::quadratic(2).unwrap(), 129, "x^2-y^2");
    let radii = dyadic_radii(5);
    c.bench_function("holder_fit/129", |b| b.iter(|| holder_fit(&u, &[0.0, 0.0], &radii).unwrap()));
    c.bench_function("courant_lebesgue/129", |b| b.iter(|| courant_lebesgue_check(&u, 0.125).unwrap()));
    c.bench_function("gradient_cloud/129", |b| b.iter(|| gradient_cloud(&u, &[0.0, 0.0], 0.5).unwrap()));
    let grid = std::sync::Arc::new(Grid::with_scale(2, 129, Mask::Ball, 2.0).unwrap());
    let v = ScalarField::from_fn(grid, |p| p[0]);
    let s: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
    c.bench_function("v_profile/129", |b| b.iter(|| v_profile(&v, &s).unwrap()));
}

fn sequences(c: &mut Criterion) {
    c.bench_function("geometric_threshold", |b| b.iter(|| geometric_threshold(3.0, 0.5, 200).unwrap()));
    c.bench_function("seq_lemma_quadratic/10000", |b| b.iter(|| seq_lemma_quadratic(0.1, 1.0, 10_000).unwrap()));
}

fn hedgehog(c: &mut Criterion) {
    let mut g = c.benchmark_group("hedgehog");
    g.sample_size(10);
    let u = four_d_example();
    g.bench_function("cloud/2000", |b| b.iter(|| hedgehog_cloud(&u, 2000, 1).unwrap()));
    let cloud = hedgehog_cloud(&u, 2000, 1).unwrap();
    g.bench_function("normal_correspondence/2000", |b| b.iter(|| normal_correspondence_check(&cloud).unwrap()));
    g.finish();
}

criterion_group!(benches, field_probes, sequences, hedgehog);
criterion_main!(benches);
