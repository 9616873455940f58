//! Density-aware point-cloud selection across a touch surface and the space
//! above it.
//!
//! The surface acts as a window onto data rendered below it by a
//! head-coupled off-axis camera ([`geometry`]). Selections are driven by
//! input traces that move between the surface and mid-air ([`traces`]) and
//! are resolved against a precomputed adaptive-kernel density field
//! ([`field`]) by the brush, lasso and ray-pick techniques in [`selection`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod geometry;
pub mod pipeline;
pub mod selection;
pub mod synth;
pub mod traces;

pub use error::{Error, Result};
pub use field::{DensityField, GridBox, PointCloud};
pub use geometry::{HeadPose, ProjectionSetup, Ray, Scene, SurfaceGeometry, Vec3};
pub use pipeline::{EstimateOptions, SelectOptions, Workspace};
pub use selection::{NodeMask, SelectionResult, Technique, TriangleMesh};
pub use synth::{LabeledCloud, Metrics};
pub use traces::{InputTrace, SegmentedTrace};
