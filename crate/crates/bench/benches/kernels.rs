use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use crossel_bench::{cluster_cloud, cluster_field, grid_for, lasso_scene, radial_field};
use crossel_core::field::{estimate_density_mbe, KdeParams};
use crossel_core::selection::{lasso_frustum_mask, marching_cubes, ray_max_density, HalfSpace};
use crossel_core::{NodeMask, Ray, Vec3};

fn kde(c: &mut Criterion) {
    let cloud = cluster_cloud(10_000, 1);
    let grid = grid_for(&cloud, 64);
    let params = KdeParams::default();
    let mut g = c.benchmark_group("kde");
    g.sample_size(10);
    g.bench_function("10k points 64^3", |b| b.iter(|| estimate_density_mbe(black_box(&cloud), &grid, &params).unwrap()));
    g.finish();
}

fn mesh(c: &mut Criterion) {
    let field = radial_field(64);
    let mask = NodeMask::full(field.grid);
    c.bench_function("marching cubes 64^3", |b| b.iter(|| marching_cubes(black_box(&field), 0.5, &mask).unwrap()));
}

fn lasso(c: &mut Criterion) {
    let (lasso, setup, grid) = lasso_scene(24);
    c.bench_function("lasso frustum mask 64^3", |b| {
        b.iter(|| lasso_frustum_mask(black_box(&lasso), &setup, &grid, HalfSpace::BelowOnly))
    });
}

fn rays(c: &mut Criterion) {
    let field = cluster_field(4000, 64);
    let g = field.grid;
    let mid = (g.min + g.max) * 0.5;
    let ext = g.max - g.min;
    let step = 0.5 * g.min_spacing();
    let rays: Vec<Ray> = (0..100)
        .map(|i| {
            let a = i as f64 * 0.37;
            let origin = mid + Vec3::new(a.cos() * ext.x, a.sin() * ext.y, ext.z * 1.5);
            Ray::new(origin, mid - origin).unwrap()
        })
        .collect();
    c.bench_function("ray max density x100", |b| {
        b.iter(|| {
            for ray in &rays {
                black_box(ray_max_density(ray, &field, step).unwrap());
            }
        })
    });
}

criterion_group!(benches, kde, mesh, lasso, rays);
criterion_main!(benches);
