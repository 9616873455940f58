//! Fixtures shared by the benchmarks in `benches/`.

use crossel_core::field::{compute_bounds, estimate_density_mbe, KdeParams};
use crossel_core::geometry::compute_surface_camera;
use crossel_core::selection::Lasso;
use crossel_core::synth::gen_clusters;
use crossel_core::{DensityField, GridBox, HeadPose, PointCloud, ProjectionSetup, SurfaceGeometry, Vec3};

/// Four Plummer clusters, `n` points in total.
pub fn cluster_cloud(n: usize, seed: u64) -> PointCloud {
    gen_clusters(4, n / 4, 0.08, 0.5, seed).expect("clusters").cloud
}

/// Grid box around `cloud` with `resolution` nodes per axis.
pub fn grid_for(cloud: &PointCloud, resolution: usize) -> GridBox {
    compute_bounds(cloud, 0.1).expect("bounds").with_resolution(resolution)
}

pub fn cluster_field(n: usize, resolution: usize) -> DensityField {
    let cloud = cluster_cloud(n, 1);
    estimate_density_mbe(&cloud, &grid_for(&cloud, resolution), &KdeParams::default()).expect("field")
}

/// `1 / (1 + r²)` on `[-2, 2]³`.
pub fn radial_field(resolution: usize) -> DensityField {
    let grid = GridBox::new(Vec3::repeat(-2.0), Vec3::repeat(2.0), [resolution; 3]).expect("grid");
    DensityField::from_fn(grid, |p| 1.0 / (1.0 + p.norm_squared())).expect("field")
}

/// A canonical surface over a box below it, a head above, and a star
/// shaped lasso of `vertices` points.
pub fn lasso_scene(vertices: usize) -> (Lasso, ProjectionSetup, GridBox) {
    let surface = SurfaceGeometry::canonical(0.6, 0.4);
    let setup = compute_surface_camera(&HeadPose::at(Vec3::new(0.0, -0.3, 0.5)), &surface, 5.0).expect("camera");
    let grid = GridBox::new(Vec3::new(-0.3, -0.2, -0.4), Vec3::new(0.3, 0.2, 0.05), [64; 3]).expect("grid");
    let lasso = Lasso {
        vertices: (0..vertices)
            .map(|i| {
                let a = i as f64 / vertices as f64 * std::f64::consts::TAU;
                let r = if i % 2 == 0 { 0.15 } else { 0.08 };
                [r * a.cos(), r * a.sin()]
            })
            .collect(),
        closed: true,
    };
    (lasso, setup, grid)
}
