//! Brush selection: a capsule-shaped volume of interest around a 3D path,
//! and BrushWYP, which lifts surface strokes to the densest point under
//! each sample before brushing.

use super::{ray_max_density, NodeMask, SelectionResult, Technique};
use crate::error::{Error, Result};
use crate::field::{DensityField, GridBox};
use crate::geometry::{surface_ray, HeadPose, Vec3};
use crate::traces::{SegmentedTrace, Space};

/// Brush radius used when none is configured: 2.5% of the box diagonal.
pub fn default_radius(grid: &GridBox) -> f64 {
    0.025 * grid.diagonal()
}

/// Fixed ray step: half the smallest cell edge.
pub fn default_ray_step(grid: &GridBox) -> f64 {
    0.5 * grid.min_spacing()
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("brush radius", "must be positive"))
    }
}

fn segment_distance_squared(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm_squared()
}

/// Marks the nodes within `radius` of any segment of `path`.
fn stamp_capsules(mask: &mut NodeMask, path: &[Vec3], radius: f64) {
    let grid = mask.grid;
    let s = grid.spacing();
    let r2 = radius * radius;
    let pieces: Vec<(Vec3, Vec3)> = if path.len() == 1 {
        vec![(path[0], path[0])]
    } else {
        path.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for (a, b) in pieces {
        let lo = a.inf(&b).add_scalar(-radius);
        let hi = a.sup(&b).add_scalar(radius);
        let range = |axis: usize| {
            let n = grid.resolution[axis] as f64;
            let i0 = ((lo[axis] - grid.min[axis]) / s[axis]).floor().max(0.0);
            let i1 = ((hi[axis] - grid.min[axis]) / s[axis]).ceil().min(n - 1.0);
            i0 as usize..=i1 as usize
        };
        // boxes overlapping the grid give non-empty index ranges
        if (0..3).any(|axis| hi[axis] < grid.min[axis] || lo[axis] > grid.max[axis]) {
            continue;
        }
        for k in range(2) {
            for j in range(1) {
                for i in range(0) {
                    let p = grid.node_position(i, j, k);
                    if segment_distance_squared(&p, &a, &b) <= r2 {
                        mask.set(grid.index(i, j, k), true);
                    }
                }
            }
        }
    }
}

/// `V_init`: nodes within `radius` of the path polyline.
pub fn brush_voi(path: &[Vec3], radius: f64, grid: &GridBox) -> Result<NodeMask> {
    brush_voi_runs(&[path], radius, grid)
}

/// Union of capsule VOIs over several disjoint polylines.
pub(crate) fn brush_voi_runs(runs: &[&[Vec3]], radius: f64, grid: &GridBox) -> Result<NodeMask> {
    check_radius(radius)?;
    if runs.iter().all(|r| r.is_empty()) {
        return Err(Error::invalid("brush path", "no points"));
    }
    let mut mask = NodeMask::empty(*grid);
    for run in runs.iter().filter(|r| !r.is_empty()) {
        stamp_capsules(&mut mask, run, radius);
    }
    Ok(mask)
}

/// Brushes along `path` and keeps the denser-than-average part of the
/// brushed volume. An empty brushed volume yields an empty selection.
pub fn brush_select(path: &[Vec3], field: &DensityField, radius: f64) -> Result<SelectionResult> {
    let voi = brush_voi(path, radius, &field.grid)?;
    if voi.is_empty() {
        return Ok(SelectionResult::empty(Technique::Brush, field.grid));
    }
    SelectionResult::from_region(Technique::Brush, field, voi)
}

/// Brush input assembled from a cross-space stroke: ray-picked points for
/// surface samples and raw positions for air samples, in stroke order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CombinedPath {
    pub points: Vec<Vec3>,
    /// Number of points that came from surface samples.
    pub poi_count: usize,
    /// Surface samples whose ray found no density.
    pub dropped: usize,
}

/// Replaces every surface sample by the densest point on the ray from the
/// head through it; samples whose ray sees no density are dropped.
pub fn combined_path(trace: &SegmentedTrace, field: &DensityField, head: &HeadPose, step: f64) -> Result<CombinedPath> {
    let mut out = CombinedPath::default();
    for seg in &trace.segments {
        let samples = &trace.samples(seg.space)[seg.range.clone()];
        match seg.space {
            Space::Air => out.points.extend_from_slice(samples),
            Space::Surface => {
                for s in samples {
                    let ray = surface_ray(s, head)?;
                    match ray_max_density(&ray, field, step)? {
                        Some(p) => {
                            out.points.push(p);
                            out.poi_count += 1;
                        }
                        None => out.dropped += 1,
                    }
                }
            }
        }
    }
    Ok(out)
}

/// BrushWYP: brush selection along the combined path.
pub fn brush_wyp(trace: &SegmentedTrace, field: &DensityField, head: &HeadPose, radius: f64) -> Result<SelectionResult> {
    check_radius(radius)?;
    let path = combined_path(trace, field, head, default_ray_step(&field.grid))?;
    if path.points.is_empty() {
        return Ok(SelectionResult::empty(Technique::BrushWyp, field.grid));
    }
    let mut result = brush_select(&path.points, field, radius)?;
    result.technique = Technique::BrushWyp;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SurfaceGeometry;
    use crate::traces::{InputSample, InputTrace, Source};

    fn grid() -> GridBox {
        GridBox::new(Vec3::repeat(-1.0), Vec3::repeat(1.0), [21; 3]).unwrap()
    }

    #[test]
    fn single_point_is_a_ball() {
        let g = grid();
        let c = Vec3::new(0.05, -0.1, 0.23);
        let m = brush_voi(&[c], 0.31, &g).unwrap();
        for n in 0..g.node_count() {
            assert_eq!(m.get(n), (g.position_of(n) - c).norm_squared() <= 0.31 * 0.31);
        }
    }

    #[test]
    fn segment_matches_brute_force() {
        let g = grid();
        let (a, b) = (Vec3::new(-0.7, -0.2, 0.1), Vec3::new(0.6, 0.4, -0.3));
        let r = 0.17;
        let m = brush_voi(&[a, b], r, &g).unwrap();
        for n in 0..g.node_count() {
            let p = g.position_of(n);
            // independent form: minimise over the parametrised segment
            let ab = b - a;
            let t = ((p - a).dot(&ab) / ab.dot(&ab)).clamp(0.0, 1.0);
            let d = (p - a - ab * t).norm();
            if (d - r).abs() > 1e-9 {
                assert_eq!(m.get(n), d <= r, "node {n}");
            }
        }
    }

    #[test]
    fn tiny_radius_between_nodes_is_empty() {
        let g = grid();
        let m = brush_voi(&[Vec3::repeat(0.05)], 0.01, &g).unwrap();
        assert!(m.is_empty());
        assert!(brush_voi(&[Vec3::zeros()], 0.0, &g).is_err());
        assert!(brush_voi(&[], 0.1, &g).is_err());
        let far = brush_voi(&[Vec3::repeat(9.0)], 0.1, &g).unwrap();
        assert!(far.is_empty());
    }

    #[test]
    fn brush_on_uniform_field_is_empty_and_deterministic() {
        let g = grid();
        let uniform = DensityField::from_fn(g, |_| 1.0).unwrap();
        let r = brush_select(&[Vec3::zeros(), Vec3::repeat(0.5)], &uniform, 0.2).unwrap();
        assert!(r.volume.is_empty());
        assert!(r.rho0.is_some());
        let blob = DensityField::from_fn(g, |p| (-(p.norm_squared()) * 8.0).exp()).unwrap();
        let path = [Vec3::new(-0.5, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0)];
        assert_eq!(brush_select(&path, &blob, 0.3).unwrap(), brush_select(&path, &blob, 0.3).unwrap());
        let nothing = brush_select(&[Vec3::repeat(0.05)], &blob, 0.01).unwrap();
        assert!(nothing.rho0.is_none() && nothing.volume.is_empty());
    }

    #[test]
    fn air_only_wyp_reduces_to_brush() {
        let g = grid();
        let field = DensityField::from_fn(g, |p| (-(p - Vec3::new(0.2, 0.0, 0.3)).norm_squared() * 6.0).exp()).unwrap();
        let surface = SurfaceGeometry::canonical(2.0, 2.0);
        let pts = [[0.0, 0.0, 0.2], [0.2, 0.1, 0.3], [0.4, 0.0, 0.5]];
        let trace = InputTrace {
            samples: pts
                .iter()
                .enumerate()
                .map(|(i, p)| InputSample {
                    position: Vec3::new(p[0], p[1], p[2]),
                    timestamp: i as f64,
                    source: Source::Hand,
                    declared_space: None,
                })
                .collect(),
            meta: Default::default(),
        };
        let seg = crate::traces::segment_trace(&trace, &surface, 0.005).unwrap();
        let head = HeadPose::at(Vec3::new(0.0, -0.5, 1.5));
        let wyp = brush_wyp(&seg, &field, &head, 0.25).unwrap();
        let plain = brush_select(&seg.air_samples, &field, 0.25).unwrap();
        assert_eq!(wyp.volume, plain.volume);
        assert_eq!(wyp.rho0, plain.rho0);
    }
}
