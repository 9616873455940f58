//! Density-aware selection over the grid box.
//!
//! Every technique reduces to the same two steps once a constraining region
//! `V_CR` is known: the threshold `rho0` is the mean node density inside the
//! region, and the selected volume `V` is every region node whose density
//! strictly exceeds it. The techniques differ in how they build the region:
//! a capsule around a brush path ([`brush`]), a lasso frustum ([`lasso`]), or
//! both joined across the surface.

pub mod brush;
pub mod lasso;
pub mod mesh;
pub mod ray;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{DensityField, GridBox, PointCloud};
use crate::geometry::SurfaceGeometry;

pub use brush::{brush_select, brush_voi, brush_wyp, combined_path, default_radius, default_ray_step, CombinedPath};
pub use lasso::{
    brush_lasso, brush_lasso_with, cloud_lasso, cloud_lasso_with, lasso_frustum_mask, lasso_from_surface_samples,
    HalfSpace, Lasso,
};
pub use mesh::{marching_cubes, TriangleMesh};
pub use ray::{clip_ray_to_box, ray_accumulated_jump, ray_max_density};

/// One flag per grid node, in the grid's x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMask {
    pub grid: GridBox,
    bits: Vec<bool>,
}

impl NodeMask {
    pub fn empty(grid: GridBox) -> Self {
        NodeMask {
            bits: vec![false; grid.node_count()],
            grid,
        }
    }

    pub fn full(grid: GridBox) -> Self {
        NodeMask {
            bits: vec![true; grid.node_count()],
            grid,
        }
    }

    pub fn from_bits(grid: GridBox, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.node_count() {
            return Err(Error::invalid("mask", "length does not match the grid"));
        }
        Ok(NodeMask { grid, bits })
    }

    /// Evaluates `f(index)` for every node in parallel.
    pub fn from_fn(grid: GridBox, f: impl Fn(usize) -> bool + Sync + Send) -> Self {
        let bits = (0..grid.node_count()).into_par_iter().map(f).collect();
        NodeMask { grid, bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set(&mut self, index: usize, on: bool) {
        self.bits[index] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    fn combine(&self, other: &NodeMask, op: impl Fn(bool, bool) -> bool) -> Result<NodeMask> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(NodeMask {
            grid: self.grid,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| op(a, b)).collect(),
        })
    }

    pub fn union(&self, other: &NodeMask) -> Result<NodeMask> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &NodeMask) -> Result<NodeMask> {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &NodeMask) -> Result<NodeMask> {
        self.combine(other, |a, b| a && !b)
    }

    /// Whether the cell with lower corner `cell` has any corner in the mask.
    pub fn touches_cell(&self, cell: [usize; 3]) -> bool {
        let [i, j, k] = cell;
        (0..8).any(|c| self.bits[self.grid.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))])
    }
}

/// `V_a`: the nodes of `mask` strictly above the surface plane.
pub fn clip_mask_above(mask: &NodeMask, surface: &SurfaceGeometry) -> NodeMask {
    let grid = mask.grid;
    NodeMask::from_fn(grid, |n| mask.get(n) && surface.signed_distance(&grid.position_of(n)) > 0.0)
}

/// Mean node density over the region, summed in ascending node order.
pub fn threshold_mean_density(field: &DensityField, region: &NodeMask) -> Result<f64> {
    if field.grid != region.grid {
        return Err(Error::GridMismatch);
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for n in region.indices() {
        sum += field.value(n);
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(sum / count as f64)
}

/// Region nodes whose density strictly exceeds `rho0`.
pub fn select_volume(field: &DensityField, region: &NodeMask, rho0: f64) -> Result<NodeMask> {
    if field.grid != region.grid {
        return Err(Error::GridMismatch);
    }
    if !rho0.is_finite() {
        return Err(Error::invalid("threshold", "must be finite"));
    }
    Ok(NodeMask::from_fn(region.grid, |n| region.get(n) && field.value(n) > rho0))
}

/// Indices of the points lying in a cell with a corner in `volume` whose
/// interpolated density exceeds `rho0`.
pub fn points_in_selection(cloud: &PointCloud, field: &DensityField, volume: &NodeMask, rho0: f64) -> Vec<usize> {
    (0..cloud.len())
        .into_par_iter()
        .filter(|&i| {
            let p = &cloud.positions[i];
            match field.grid.locate(p) {
                Some((cell, _)) => volume.touches_cell(cell) && field.sample(p) > rho0,
                None => false,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technique {
    Brush,
    BrushWyp,
    BrushLasso,
    CloudLasso,
}

impl Technique {
    pub fn name(self) -> &'static str {
        match self {
            Technique::Brush => "brush",
            Technique::BrushWyp => "brush-wyp",
            Technique::BrushLasso => "brush-lasso",
            Technique::CloudLasso => "cloud-lasso",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Technique::Brush, Technique::BrushWyp, Technique::BrushLasso, Technique::CloudLasso]
            .into_iter()
            .find(|t| t.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub technique: Technique,
    /// Constraining region `V_CR`.
    pub region: NodeMask,
    /// Selected volume `V`.
    pub volume: NodeMask,
    /// `None` when the region was empty and nothing was thresholded.
    pub rho0: Option<f64>,
    /// Sorted point indices; filled by [`SelectionResult::with_points`].
    pub points: Vec<usize>,
    pub mesh: TriangleMesh,
}

impl SelectionResult {
    pub fn empty(technique: Technique, grid: GridBox) -> Self {
        SelectionResult {
            technique,
            region: NodeMask::empty(grid),
            volume: NodeMask::empty(grid),
            rho0: None,
            points: Vec::new(),
            mesh: TriangleMesh::default(),
        }
    }

    /// Thresholds `region` and extracts the isosurface.
    pub fn from_region(technique: Technique, field: &DensityField, region: NodeMask) -> Result<Self> {
        let rho0 = threshold_mean_density(field, &region)?;
        let volume = select_volume(field, &region, rho0)?;
        let mesh = marching_cubes(field, rho0, &region)?;
        Ok(SelectionResult {
            technique,
            region,
            volume,
            rho0: Some(rho0),
            points: Vec::new(),
            mesh,
        })
    }

    pub fn with_points(mut self, cloud: &PointCloud, field: &DensityField) -> Self {
        self.points = match self.rho0 {
            Some(rho0) => points_in_selection(cloud, field, &self.volume, rho0),
            None => Vec::new(),
        };
        self
    }

    pub fn node_count(&self) -> usize {
        self.volume.count()
    }

    pub fn region_count(&self) -> usize {
        self.region.count()
    }

    pub fn to_json(&self) -> SelectionJson {
        SelectionJson {
            technique: self.technique,
            rho0: self.rho0,
            selected_points: self.points.clone(),
            node_count: self.node_count(),
            n_vcr: self.region_count(),
        }
    }
}

/// Serialized summary of a selection.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SelectionJson {
    pub technique: Technique,
    pub rho0: Option<f64>,
    pub selected_points: Vec<usize>,
    pub node_count: usize,
    #[serde(rename = "N_VCR")]
    pub n_vcr: usize,
}

/// Removes `removal` from `current`: the volume and point sets lose the
/// removed members, the threshold stays that of `current`, and the mesh is
/// rebuilt around what remains.
pub fn subtract(field: &DensityField, current: &SelectionResult, removal: &SelectionResult) -> Result<SelectionResult> {
    if current.volume.grid != removal.volume.grid || field.grid != current.volume.grid {
        return Err(Error::GridMismatch);
    }
    let volume = current.volume.difference(&removal.volume)?;
    let mesh = match current.rho0 {
        Some(rho0) => marching_cubes(field, rho0, &volume)?,
        None => TriangleMesh::default(),
    };
    let points = current
        .points
        .iter()
        .copied()
        .filter(|i| removal.points.binary_search(i).is_err())
        .collect();
    Ok(SelectionResult {
        technique: current.technique,
        region: current.region.clone(),
        volume,
        rho0: current.rho0,
        points,
        mesh,
    })
}
