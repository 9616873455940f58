//! Machine-drawn strokes and dataset placement beneath a surface.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng, LabeledCloud, RNG_ALGORITHM};
use crate::error::{Error, Result};
use crate::geometry::{HeadPose, SurfaceGeometry, Vec3};
use crate::traces::{polyline_length, resample_polyline, InputSample, InputTrace, Source, Space};

const SAMPLE_RATE: f64 = 60.0;
const LASSO_SAMPLES: f64 = 96.0;
const BRUSH_SAMPLES: f64 = 120.0;
const LASSO_INFLATION: f64 = 1.1;

/// How a dataset is fitted to the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Fraction of the shorter surface side spanned by the larger
    /// horizontal extent of the data.
    pub fill: f64,
    /// Signed distance of the data's highest point from the plane; negative
    /// puts the whole dataset below the surface.
    pub top: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Placement { fill: 0.7, top: -0.02 }
    }
}

/// Scales and moves a dataset into the surface frame: data `x`/`y` follow
/// the surface axes, data `z` the surface normal, and the horizontal
/// extent is centered on the surface.
pub fn place_under_surface(labeled: &LabeledCloud, surface: &SurfaceGeometry, placement: Placement) -> Result<LabeledCloud> {
    surface.validate()?;
    if !(placement.fill > 0.0) || !placement.top.is_finite() {
        return Err(Error::invalid("placement", "fill must be positive and top finite"));
    }
    let pts = &labeled.cloud.positions;
    if pts.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts.iter().chain(labeled.spines.iter().flatten()) {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let ext = hi - lo;
    let span = ext.x.max(ext.y).max(if ext.x.max(ext.y) > 0.0 { 0.0 } else { ext.z });
    if !(span > 0.0) {
        return Err(Error::invalid("placement", "dataset has no extent"));
    }
    let s = placement.fill * surface.width.min(surface.height) / span;
    let mid = (lo + hi) * 0.5;
    let y_axis = surface.axis_z.cross(&surface.axis_x);
    Ok(labeled.map_positions(|p| {
        let l = Vec3::new(s * (p.x - mid.x), s * (p.y - mid.y), s * (p.z - hi.z) + placement.top);
        surface.center + surface.axis_x * l.x + y_axis * l.y + surface.axis_z * l.z
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    LassoAroundCluster,
    BrushAlongFilament,
    MixedCrossSpace,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::LassoAroundCluster => "lasso_around_cluster",
            TraceKind::BrushAlongFilament => "brush_along_filament",
            TraceKind::MixedCrossSpace => "mixed_cross_space",
        }
    }
}

/// Where the line from the head through `p` meets the surface plane, as
/// surface-local `(u, v)`.
fn central_projection(p: &Vec3, head: &HeadPose, surface: &SurfaceGeometry) -> Option<[f64; 2]> {
    let h = head.position;
    let (dh, dp) = (surface.signed_distance(&h), surface.signed_distance(p));
    if !(dh > dp) {
        return None;
    }
    let q = h + (p - h) * (dh / (dh - dp));
    let l = surface.to_local(&q);
    Some([l.x, l.y])
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain).
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Closed lasso around the projections of `points`, as on-plane world
/// positions starting at a seed-chosen hull vertex.
fn lasso_stroke(points: &[Vec3], head: &HeadPose, surface: &SurfaceGeometry, start: usize) -> Result<Vec<Vec3>> {
    let projected: Vec<[f64; 2]> = points.iter().filter_map(|p| central_projection(p, head, surface)).collect();
    let hull = convex_hull(projected);
    if hull.len() < 3 {
        return Err(Error::invalid("scripted lasso", "target projects to fewer than three hull points"));
    }
    let n = hull.len() as f64;
    let c = hull.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n]);
    let (hw, hh) = (0.5 * surface.width, 0.5 * surface.height);
    let mut ring: Vec<Vec3> = (0..hull.len())
        .map(|i| {
            let p = hull[(i + start) % hull.len()];
            let u = (c[0] + LASSO_INFLATION * (p[0] - c[0])).clamp(-hw, hw);
            let v = (c[1] + LASSO_INFLATION * (p[1] - c[1])).clamp(-hh, hh);
            surface.on_plane(u, v)
        })
        .collect();
    ring.push(ring[0]);
    let spacing = polyline_length(&ring) / LASSO_SAMPLES;
    let mut stroke = resample_polyline(&ring, spacing)?;
    stroke.pop();
    Ok(stroke)
}

fn push_samples(out: &mut Vec<InputSample>, points: &[Vec3], space: Space, source: Source) {
    for p in points {
        out.push(InputSample {
            position: *p,
            timestamp: out.len() as f64 / SAMPLE_RATE,
            source,
            declared_space: Some(space),
        });
    }
}

fn target_spine(labeled: &LabeledCloud, target: u32) -> Result<&Vec<Vec3>> {
    target
        .checked_sub(1)
        .and_then(|i| labeled.spines.get(i as usize))
        .ok_or(Error::UnknownLabel(target))
}

/// Deterministic stroke standing in for a participant.
///
/// * lasso: the convex hull of the target's projection through the head,
///   inflated by 10% about its centroid and clamped to the surface;
/// * brush: the target's spine, resampled; parts above the plane become air
///   samples and parts below become the surface points on the head rays
///   through them;
/// * mixed: an air brush over the above-plane part of the spine followed by
///   a surface lasso around the below-plane part of the target.
///
/// The seed only picks where the lasso starts and which way the brush runs.
pub fn gen_scripted_trace(
    kind: TraceKind,
    labeled: &LabeledCloud,
    surface: &SurfaceGeometry,
    head: &HeadPose,
    target: u32,
    seed: u64,
) -> Result<InputTrace> {
    surface.validate()?;
    if surface.signed_distance(&head.position) <= 0.0 {
        return Err(Error::Geometry("head must be strictly above the surface plane".into()));
    }
    let members: Vec<Vec3> = labeled
        .indices_with_label(target)
        .into_iter()
        .map(|i| labeled.cloud.positions[i])
        .collect();
    if members.is_empty() {
        return Err(Error::UnknownLabel(target));
    }
    let mut r = rng(seed);
    let start: usize = r.random_range(0..1 << 16);
    let reverse: bool = r.random();
    let mut samples = Vec::new();
    match kind {
        TraceKind::LassoAroundCluster => {
            let stroke = lasso_stroke(&members, head, surface, start)?;
            push_samples(&mut samples, &stroke, Space::Surface, Source::Pen);
        }
        TraceKind::BrushAlongFilament => {
            let mut spine = target_spine(labeled, target)?.clone();
            if reverse {
                spine.reverse();
            }
            let spine = resample_polyline(&spine, polyline_length(&spine) / BRUSH_SAMPLES)?;
            for p in &spine {
                if surface.signed_distance(p) > 0.0 {
                    push_samples(&mut samples, &[*p], Space::Air, Source::Hand);
                } else if let Some([u, v]) = central_projection(p, head, surface) {
                    if u.abs() <= 0.5 * surface.width && v.abs() <= 0.5 * surface.height {
                        push_samples(&mut samples, &[surface.on_plane(u, v)], Space::Surface, Source::Pen);
                    }
                }
            }
        }
        TraceKind::MixedCrossSpace => {
            let mut spine = target_spine(labeled, target)?.clone();
            // walk from the high end so the air part comes first
            if surface.signed_distance(&spine[0]) < surface.signed_distance(spine.last().unwrap()) {
                spine.reverse();
            }
            let spine = resample_polyline(&spine, polyline_length(&spine) / BRUSH_SAMPLES)?;
            let air: Vec<Vec3> = spine.iter().copied().filter(|p| surface.signed_distance(p) > 0.0).collect();
            push_samples(&mut samples, &air, Space::Air, Source::Hand);
            let below: Vec<Vec3> = members.iter().copied().filter(|p| surface.signed_distance(p) <= 0.0).collect();
            if below.len() >= 3 {
                let stroke = lasso_stroke(&below, head, surface, start)?;
                push_samples(&mut samples, &stroke, Space::Surface, Source::Pen);
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::invalid("scripted trace", "stroke has no samples on the surface or above it"));
    }
    let mut meta = serde_json::Map::new();
    meta.insert("kind".into(), kind.name().into());
    meta.insert("target".into(), target.into());
    meta.insert("seed".into(), seed.into());
    meta.insert("rng".into(), RNG_ALGORITHM.into());
    Ok(InputTrace { samples, meta })
}
