//! End-to-end engine path shared by the command line and the HTTP service.
//!
//! All work happens in the surface frame: the surface center is the origin,
//! its axes are the coordinate axes, and the grid box is aligned with them.
//! Clouds and traces are moved into that frame on entry and meshes are moved
//! back on exit, so the surface's tilt in the room changes nothing but the
//! reported world coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{compute_bounds, estimate_density_mbe, DensityField, KdeParams, PointCloud, DEFAULT_RESOLUTION};
use crate::geometry::{compute_surface_camera, HeadPose, ProjectionSetup, RigidFrame, Scene, Vec3};
use crate::selection::{
    brush_lasso, brush_select, brush_wyp, cloud_lasso, default_radius, lasso_from_surface_samples, SelectionResult,
    Technique, TriangleMesh,
};
use crate::traces::{segment_trace, InputTrace, DEFAULT_SURFACE_EPS};

/// Grid padding as a fraction of the data's bounding diagonal.
pub const DEFAULT_PADDING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateOptions {
    pub resolution: usize,
    pub padding: f64,
    pub kde: KdeParams,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            resolution: DEFAULT_RESOLUTION,
            padding: DEFAULT_PADDING,
            kde: KdeParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub technique: Technique,
    /// Brush radius in meters; defaults to 2.5% of the grid diagonal.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Surface contact tolerance in meters.
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    DEFAULT_SURFACE_EPS
}

impl SelectOptions {
    pub fn new(technique: Technique) -> Self {
        SelectOptions {
            technique,
            radius: None,
            eps: DEFAULT_SURFACE_EPS,
        }
    }
}

/// Moves a world-frame cloud into the scene's surface frame.
pub fn localize_cloud(cloud: &PointCloud, scene: &Scene) -> Result<PointCloud> {
    let frame = scene.frame()?;
    Ok(cloud.map_positions(|p| frame.to_local(p)))
}

/// Density field of a world-frame cloud, over a box aligned with the
/// scene's surface frame.
pub fn estimate_field(cloud: &PointCloud, scene: &Scene, options: &EstimateOptions) -> Result<DensityField> {
    scene.validate()?;
    let local = localize_cloud(cloud, scene)?;
    let grid = compute_bounds(&local, options.padding)?.with_resolution(options.resolution);
    grid.validate()?;
    estimate_density_mbe(&local, &grid, &options.kde)
}

/// Far plane used when the scene leaves it open: four box diagonals past
/// the surface.
pub fn default_far(near: f64, field: &DensityField) -> f64 {
    near + 4.0 * field.grid.diagonal()
}

/// A scene with its density field and, optionally, the cloud it came from,
/// all held in the surface frame.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub scene: Scene,
    pub frame: RigidFrame,
    /// The scene expressed in the surface frame.
    pub local: Scene,
    pub field: DensityField,
    pub cloud: Option<PointCloud>,
}

impl Workspace {
    /// `field` must already be in the scene's surface frame, as produced by
    /// [`estimate_field`]; `cloud` is in world coordinates.
    pub fn new(scene: Scene, field: DensityField, cloud: Option<&PointCloud>) -> Result<Self> {
        scene.validate()?;
        let frame = scene.frame()?;
        let local = scene.localized()?;
        let cloud = cloud.map(|c| c.map_positions(|p| frame.to_local(p)));
        Ok(Workspace {
            scene,
            frame,
            local,
            field,
            cloud,
        })
    }

    pub fn estimate(scene: Scene, cloud: &PointCloud, options: &EstimateOptions) -> Result<Self> {
        let field = estimate_field(cloud, &scene, options)?;
        Self::new(scene, field, Some(cloud))
    }

    fn far_for(&self, head_height: f64) -> f64 {
        self.scene.far.unwrap_or_else(|| default_far(head_height, &self.field))
    }

    /// Surface camera in the surface frame for the scene's head.
    pub fn local_camera(&self) -> Result<ProjectionSetup> {
        let head = &self.local.head;
        compute_surface_camera(head, &self.local.surface, self.far_for(head.position.z))
    }

    /// Surface camera in world coordinates for an arbitrary head position.
    pub fn world_camera(&self, head: Vec3) -> Result<ProjectionSetup> {
        let pose = HeadPose::at(head);
        let height = self.scene.surface.signed_distance(&head);
        compute_surface_camera(&pose, &self.scene.surface, self.far_for(height))
    }

    /// Runs one technique on a world-frame trace.
    pub fn select(&self, trace: &InputTrace, options: &SelectOptions) -> Result<SelectionResult> {
        let local_trace = trace.map_positions(|p| self.frame.to_local(p));
        let surface = &self.local.surface;
        let segmented = segment_trace(&local_trace, surface, options.eps)?;
        let radius = options.radius.unwrap_or_else(|| default_radius(&self.field.grid));
        let result = match options.technique {
            Technique::Brush => brush_select(&segmented.ordered(), &self.field, radius)?,
            Technique::BrushWyp => brush_wyp(&segmented, &self.field, &self.local.head, radius)?,
            Technique::BrushLasso => brush_lasso(&segmented, &self.field, surface, &self.local_camera()?, radius)?,
            Technique::CloudLasso => {
                if segmented.surface_samples.is_empty() {
                    return Err(Error::EmptyRegion);
                }
                let lasso = lasso_from_surface_samples(&segmented.surface_samples, surface)?;
                cloud_lasso(&lasso, &self.field, &self.local_camera()?)?
            }
        };
        Ok(match &self.cloud {
            Some(cloud) => result.with_points(cloud, &self.field),
            None => result,
        })
    }

    /// Mesh vertices moved back to world coordinates.
    pub fn world_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        mesh.map_vertices(|p| self.frame.to_world(p))
    }
}
