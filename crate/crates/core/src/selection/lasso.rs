//! Lasso selection through the surface camera.
//!
//! A lasso drawn on the surface is extruded from the head through the
//! surface rectangle into a frustum `F`. CloudLasso thresholds `F` directly;
//! BrushLasso joins the below-surface part of `F` with the above-surface part
//! of a brush capsule so one stroke can start in the air and finish on the
//! glass.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use super::brush::brush_voi_runs;
use super::{clip_mask_above, NodeMask, SelectionResult, Technique};
use crate::error::{Error, Result};
use crate::field::{DensityField, GridBox};
use crate::geometry::{ProjectionSetup, SurfaceGeometry, Vec3};
use crate::traces::{SegmentedTrace, Space};

/// Closed polygon in surface-local `(u, v)` coordinates, meters from the
/// surface center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lasso {
    pub vertices: Vec<[f64; 2]>,
    pub closed: bool,
}

impl Lasso {
    /// Even-odd rule, so self-intersecting strokes are handled without
    /// special cases.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        even_odd(&self.vertices, u, v)
    }
}

fn even_odd(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len().wrapping_sub(1);
    for i in 0..poly.len() {
        let ([xi, yi], [xj, yj]) = (poly[i], poly[j]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Joins surface samples into a closed lasso.
pub fn lasso_from_surface_samples(samples: &[Vec3], surface: &SurfaceGeometry) -> Result<Lasso> {
    surface.validate()?;
    let vertices: Vec<[f64; 2]> = samples
        .iter()
        .map(|p| {
            let l = surface.to_local(p);
            [l.x, l.y]
        })
        .collect();
    let mut distinct = vertices.clone();
    distinct.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::invalid("lasso", "needs at least three distinct samples"));
    }
    Ok(Lasso { vertices, closed: true })
}

/// Which side of the surface the lasso frustum keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfSpace {
    /// Nodes on or below the surface plane.
    BelowOnly,
    All,
}

/// Lasso frustum over the grid.
///
/// A node belongs to the frustum when it is in front of the eye, projects
/// inside the surface rectangle and inside the lasso. With
/// [`HalfSpace::BelowOnly`] nodes above the plane are dropped; nodes exactly
/// on the plane stay, complementing the strict test of [`clip_mask_above`].
pub fn lasso_frustum_mask(lasso: &Lasso, setup: &ProjectionSetup, grid: &GridBox, half_space: HalfSpace) -> NodeMask {
    let width = setup.corner_tr.x - setup.corner_bl.x;
    let height = setup.corner_tr.y - setup.corner_bl.y;
    let poly: Vec<[f64; 2]> = lasso
        .vertices
        .iter()
        .map(|&[u, v]| [2.0 * u / width, 2.0 * v / height])
        .collect();
    if poly.len() < 3 {
        return NodeMask::empty(*grid);
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &poly {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let m = setup.projection;
    NodeMask::from_fn(*grid, |n| {
        let local = setup.to_camera(&grid.position_of(n));
        if half_space == HalfSpace::BelowOnly && local.z - setup.surface_center.z > 0.0 {
            return false;
        }
        let clip = m * Vector4::new(local.x, local.y, local.z, 1.0);
        if !(clip.w > 0.0) {
            return false;
        }
        let (x, y) = (clip.x / clip.w, clip.y / clip.w);
        x.abs() <= 1.0
            && y.abs() <= 1.0
            && x >= lo[0]
            && x <= hi[0]
            && y >= lo[1]
            && y <= hi[1]
            && even_odd(&poly, x, y)
    })
}

fn lasso_or_none(trace: &SegmentedTrace, surface: &SurfaceGeometry) -> Result<Option<Lasso>> {
    if trace.surface_samples.len() < 3 {
        return Ok(None);
    }
    match lasso_from_surface_samples(&trace.surface_samples, surface) {
        Ok(l) => Ok(Some(l)),
        Err(Error::Invalid { what: "lasso", .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// BrushLasso: `V_CR` is the above-surface part of the air brush joined with
/// the below-surface lasso frustum.
pub fn brush_lasso(
    trace: &SegmentedTrace,
    field: &DensityField,
    surface: &SurfaceGeometry,
    setup: &ProjectionSetup,
    radius: f64,
) -> Result<SelectionResult> {
    brush_lasso_with(trace, field, surface, setup, radius, HalfSpace::BelowOnly)
}

/// [`brush_lasso`] with a configurable lasso half-space.
pub fn brush_lasso_with(
    trace: &SegmentedTrace,
    field: &DensityField,
    surface: &SurfaceGeometry,
    setup: &ProjectionSetup,
    radius: f64,
    lasso_clip: HalfSpace,
) -> Result<SelectionResult> {
    let grid = field.grid;
    let runs: Vec<&[Vec3]> = trace
        .segments
        .iter()
        .filter(|s| s.space == Space::Air)
        .map(|s| &trace.air_samples[s.range.clone()])
        .collect();
    let above = if runs.is_empty() {
        NodeMask::empty(grid)
    } else {
        clip_mask_above(&brush_voi_runs(&runs, radius, &grid)?, surface)
    };
    let below = match lasso_or_none(trace, surface)? {
        Some(lasso) => lasso_frustum_mask(&lasso, setup, &grid, lasso_clip),
        None => NodeMask::empty(grid),
    };
    let region = above.union(&below)?;
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    SelectionResult::from_region(Technique::BrushLasso, field, region)
}

/// CloudLasso first-level stage: threshold the whole lasso frustum.
pub fn cloud_lasso(lasso: &Lasso, field: &DensityField, setup: &ProjectionSetup) -> Result<SelectionResult> {
    cloud_lasso_with(lasso, field, setup, HalfSpace::All)
}

pub fn cloud_lasso_with(
    lasso: &Lasso,
    field: &DensityField,
    setup: &ProjectionSetup,
    half_space: HalfSpace,
) -> Result<SelectionResult> {
    let region = lasso_frustum_mask(lasso, setup, &field.grid, half_space);
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    SelectionResult::from_region(Technique::CloudLasso, field, region)
}
