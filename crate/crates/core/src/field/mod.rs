//! Point clouds and the regular density grid over the data's bounding box.
//!
//! Node values are stored x-fastest as `f32`, matching the on-disk field
//! format, and read back as `f64` for all arithmetic.

mod io;
mod kde;
mod spatial;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub use io::{
    cloud_to_csv, decode_field, encode_field, load_cloud, load_field, parse_cloud_csv, save_cloud, save_field,
    CloudFormat, FIELD_MAGIC, FIELD_VERSION,
};
pub use kde::{
    adaptive_bandwidths, estimate_density_mbe, estimate_density_with, mean_nearest_neighbor_distance,
    BandwidthSet, KdeParams, EPANECHNIKOV_NORM,
};
pub use spatial::PointBuckets;

/// Grid resolution used per axis unless configured otherwise.
pub const DEFAULT_RESOLUTION: usize = 128;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    /// Named per-point scalars, each as long as `positions`.
    pub attributes: BTreeMap<String, Vec<f64>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vec3>) -> Self {
        PointCloud {
            positions,
            attributes: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self
            .positions
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid("point cloud", format!("point {i} is not finite")));
        }
        for (name, values) in &self.attributes {
            if values.len() != self.positions.len() {
                return Err(Error::invalid(
                    "point cloud",
                    format!("attribute {name} has {} values for {} points", values.len(), self.len()),
                ));
            }
        }
        Ok(())
    }

    /// Applies `f` to every position, keeping attributes.
    pub fn map_positions(&self, f: impl Fn(&Vec3) -> Vec3) -> PointCloud {
        PointCloud {
            positions: self.positions.iter().map(f).collect(),
            attributes: self.attributes.clone(),
        }
    }
}

/// Axis-aligned box `B` with a node lattice spanning it corner to corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    pub min: Vec3,
    pub max: Vec3,
    pub resolution: [usize; 3],
}

impl GridBox {
    pub fn new(min: Vec3, max: Vec3, resolution: [usize; 3]) -> Result<Self> {
        let g = GridBox { min, max, resolution };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0..3).all(|a| self.max[a] > self.min[a] && self.min[a].is_finite() && self.max[a].is_finite()) {
            return Err(Error::invalid("grid box", "max must exceed min on every axis"));
        }
        if self.resolution.iter().any(|&n| n < 2) {
            return Err(Error::invalid("grid box", "resolution must be at least 2 per axis"));
        }
        Ok(())
    }

    pub fn with_resolution(self, n: usize) -> Self {
        GridBox {
            resolution: [n; 3],
            ..self
        }
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Distance between neighbouring nodes along each axis.
    pub fn spacing(&self) -> Vec3 {
        let [nx, ny, nz] = self.resolution;
        Vec3::new(
            (self.max.x - self.min.x) / (nx - 1) as f64,
            (self.max.y - self.min.y) / (ny - 1) as f64,
            (self.max.z - self.min.z) / (nz - 1) as f64,
        )
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().min()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().product()
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.resolution;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Coordinate of node `i` along `axis`.
    pub fn node_coord(&self, axis: usize, i: usize) -> f64 {
        self.min[axis] + i as f64 * self.spacing()[axis]
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let s = self.spacing();
        Vec3::new(
            self.min.x + i as f64 * s.x,
            self.min.y + j as f64 * s.y,
            self.min.z + k as f64 * s.z,
        )
    }

    pub fn position_of(&self, index: usize) -> Vec3 {
        let [i, j, k] = self.coords(index);
        self.node_position(i, j, k)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Cell holding `p` and its fractional offset inside that cell, or
    /// `None` outside the box.
    pub fn locate(&self, p: &Vec3) -> Option<([usize; 3], Vec3)> {
        if !self.contains(p) {
            return None;
        }
        let s = self.spacing();
        let mut cell = [0usize; 3];
        let mut frac = Vec3::zeros();
        for a in 0..3 {
            let g = (p[a] - self.min[a]) / s[a];
            let i = (g.floor().max(0.0) as usize).min(self.resolution[a] - 2);
            cell[a] = i;
            frac[a] = g - i as f64;
        }
        Some((cell, frac))
    }
}

/// Axis-aligned bounds of `cloud` grown by `padding_fraction` of the bounds'
/// diagonal on every side, at the default resolution.
pub fn compute_bounds(cloud: &PointCloud, padding_fraction: f64) -> Result<GridBox> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(padding_fraction >= 0.0) {
        return Err(Error::invalid("padding", "must be non-negative"));
    }
    let mut min = cloud.positions[0];
    let mut max = min;
    for p in &cloud.positions {
        min = min.inf(p);
        max = max.sup(p);
    }
    let pad = padding_fraction * (max - min).norm();
    let min = min.add_scalar(-pad);
    let max = max.add_scalar(pad);
    GridBox::new(min, max, [DEFAULT_RESOLUTION; 3])
        .map_err(|_| Error::invalid("point cloud", "bounds are degenerate"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: GridBox,
    values: Vec<f32>,
}

impl DensityField {
    pub fn new(grid: GridBox, values: Vec<f32>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.node_count() {
            return Err(Error::invalid(
                "density field",
                format!("{} values for {} nodes", values.len(), grid.node_count()),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numeric("density values must be finite and non-negative".into()));
        }
        Ok(DensityField { grid, values })
    }

    /// Evaluates `f` at every node position.
    pub fn from_fn(grid: GridBox, f: impl Fn(&Vec3) -> f64) -> Result<Self> {
        let values = (0..grid.node_count())
            .map(|n| f(&grid.position_of(n)) as f32)
            .collect();
        Self::new(grid, values)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index] as f64
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)] as f64
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0f32, f32::max) as f64
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f32::INFINITY, f32::min) as f64
    }

    /// Trilinear interpolation inside the box, zero outside.
    pub fn sample(&self, p: &Vec3) -> f64 {
        let Some(([i, j, k], t)) = self.grid.locate(p) else {
            return 0.0;
        };
        let c = |di: usize, dj: usize, dk: usize| self.node(i + di, j + dj, k + dk);
        let lerp = |a: f64, b: f64, s: f64| a + (b - a) * s;
        let x00 = lerp(c(0, 0, 0), c(1, 0, 0), t.x);
        let x10 = lerp(c(0, 1, 0), c(1, 1, 0), t.x);
        let x01 = lerp(c(0, 0, 1), c(1, 0, 1), t.x);
        let x11 = lerp(c(0, 1, 1), c(1, 1, 1), t.x);
        lerp(lerp(x00, x10, t.y), lerp(x01, x11, t.y), t.z)
    }

    /// Sum of node values times the cell volume.
    pub fn integrate_mass(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() * self.grid.cell_volume()
    }
}

/// Free-function form of [`DensityField::sample`].
pub fn sample_density(field: &DensityField, p: &Vec3) -> f64 {
    field.sample(p)
}
