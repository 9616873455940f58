//! Recorded input strokes and their split into surface and mid-air samples.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_in_surface_rect, SurfaceGeometry, Vec3};

/// Contact tolerance for classifying a sample as touching the surface.
pub const DEFAULT_SURFACE_EPS: f64 = 0.005;

/// Below this distance a sample already lies on the plane and is not moved,
/// which keeps snapping idempotent.
const ON_PLANE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Pen,
    Touch,
    Hand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Surface,
    Air,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSample {
    #[serde(rename = "p")]
    pub position: Vec3,
    #[serde(rename = "t")]
    pub timestamp: f64,
    pub source: Source,
    #[serde(rename = "space", default)]
    pub declared_space: Option<Space>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputTrace {
    pub samples: Vec<InputSample>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl InputTrace {
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::invalid("trace", "no samples"));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if !s.position.iter().all(|c| c.is_finite()) || !s.timestamp.is_finite() {
                return Err(Error::invalid("trace", format!("sample {i} is not finite")));
            }
            if i > 0 && s.timestamp < self.samples[i - 1].timestamp {
                return Err(Error::invalid("trace", format!("timestamp decreases at sample {i}")));
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn map_positions(&self, f: impl Fn(&Vec3) -> Vec3) -> InputTrace {
        InputTrace {
            samples: self
                .samples
                .iter()
                .map(|s| InputSample {
                    position: f(&s.position),
                    ..*s
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// Parses and validates a trace document.
pub fn parse_trace(document: &str) -> Result<InputTrace> {
    let trace: InputTrace = serde_json::from_str(document)?;
    trace.validate()?;
    Ok(trace)
}

/// A maximal run of consecutive samples in one space. `range` indexes the
/// corresponding sample list of the [`SegmentedTrace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub space: Space,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentedTrace {
    /// On-plane samples, snapped onto the plane.
    pub surface_samples: Vec<Vec3>,
    /// Samples above the plane.
    pub air_samples: Vec<Vec3>,
    pub segments: Vec<Segment>,
}

impl SegmentedTrace {
    /// Positions in original stroke order.
    pub fn ordered(&self) -> Vec<Vec3> {
        self.segments
            .iter()
            .flat_map(|s| self.samples(s.space)[s.range.clone()].iter().copied())
            .collect()
    }

    pub fn samples(&self, space: Space) -> &[Vec3] {
        match space {
            Space::Surface => &self.surface_samples,
            Space::Air => &self.air_samples,
        }
    }

    pub fn len(&self) -> usize {
        self.surface_samples.len() + self.air_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rebuilds a trace whose samples declare their space explicitly.
    pub fn to_trace(&self, source: Source) -> InputTrace {
        let mut samples = Vec::with_capacity(self.len());
        for seg in &self.segments {
            for p in &self.samples(seg.space)[seg.range.clone()] {
                samples.push(InputSample {
                    position: *p,
                    timestamp: samples.len() as f64 / 60.0,
                    source,
                    declared_space: Some(seg.space),
                });
            }
        }
        InputTrace {
            samples,
            meta: Default::default(),
        }
    }
}

/// Splits a trace into surface and air samples.
///
/// Declared spaces are honoured; undeclared samples within `eps` of the plane
/// count as surface contacts and are snapped onto it, samples farther above
/// are air. Samples below the plane, surface samples off the rectangle and
/// air samples not above the plane are rejected.
pub fn segment_trace(trace: &InputTrace, surface: &SurfaceGeometry, eps: f64) -> Result<SegmentedTrace> {
    trace.validate()?;
    surface.validate()?;
    if !(eps >= 0.0) {
        return Err(Error::invalid("surface tolerance", "must be non-negative"));
    }
    let mut out = SegmentedTrace::default();
    for (i, s) in trace.samples.iter().enumerate() {
        let sd = surface.signed_distance(&s.position);
        let space = match s.declared_space {
            Some(space) => space,
            None if sd.abs() <= eps => Space::Surface,
            None if sd > eps => Space::Air,
            None => {
                return Err(Error::invalid(
                    "trace",
                    format!("sample {i} lies {:.4} m below the surface", -sd),
                ))
            }
        };
        let (list, position) = match space {
            Space::Surface => {
                let snapped = if sd.abs() > ON_PLANE {
                    s.position - surface.axis_z * sd
                } else {
                    s.position
                };
                if !point_in_surface_rect(&snapped, surface, eps.max(ON_PLANE)) {
                    return Err(Error::invalid("trace", format!("surface sample {i} is off the surface")));
                }
                (&mut out.surface_samples, snapped)
            }
            Space::Air => {
                if sd <= 0.0 {
                    return Err(Error::invalid("trace", format!("air sample {i} is not above the surface")));
                }
                (&mut out.air_samples, s.position)
            }
        };
        list.push(position);
        let end = list.len();
        match out.segments.last_mut() {
            Some(seg) if seg.space == space => seg.range.end = end,
            _ => out.segments.push(Segment {
                space,
                range: end - 1..end,
            }),
        }
    }
    Ok(out)
}

/// Subdivides every polyline edge into equal pieces no longer than
/// `spacing`. Original vertices are kept, so the polyline's shape and
/// length are unchanged.
pub fn resample_polyline(points: &[Vec3], spacing: f64) -> Result<Vec<Vec3>> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid("spacing", "must be positive"));
    }
    if points.len() < 2 {
        return Ok(points.to_vec());
    }
    let mut out = vec![points[0]];
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b - a).norm();
        if len == 0.0 {
            continue;
        }
        let pieces = (len / spacing).ceil().max(1.0) as usize;
        for k in 1..pieces {
            out.push(a + (b - a) * (k as f64 / pieces as f64));
        }
        out.push(b);
    }
    Ok(out)
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}
