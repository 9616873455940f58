//! Surface/head geometry and the head-coupled surface camera.
//!
//! The surface is a physical rectangle acting as a window into the data that
//! lies below it. Each frame the surface camera is placed at the viewer's
//! head, oriented perpendicular to the surface, and given an off-axis
//! frustum whose near plane is the surface rectangle itself. Points below the
//! surface then project to where the viewer's line of sight pierces the glass.

use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

const UNIT_TOL: f64 = 1e-9;

/// Width and height of a 28-inch Surface Studio panel in meters.
pub const SURFACE_STUDIO_SIZE: (f64, f64) = (0.637, 0.438);

/// Surface incline used for the point-cloud applications, in degrees from
/// the horizontal table.
pub const DEFAULT_TILT_DEG: f64 = 21.0;

/// The physical display rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGeometry {
    pub center: Vec3,
    /// Screen horizontal, unit length.
    pub axis_x: Vec3,
    /// Screen normal, unit length, pointing into the half-space above the
    /// surface where the viewer sits.
    pub axis_z: Vec3,
    pub width: f64,
    pub height: f64,
}

/// Right-handed orthonormal frame of a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl Frame {
    /// Rotation taking world vectors into this frame's coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[self.x.transpose(), self.y.transpose(), self.z.transpose()])
    }
}

impl SurfaceGeometry {
    /// Surface centered at the origin with canonical axes.
    pub fn canonical(width: f64, height: f64) -> Self {
        SurfaceGeometry {
            center: Vec3::zeros(),
            axis_x: Vec3::x(),
            axis_z: Vec3::z(),
            width,
            height,
        }
    }

    /// A Surface Studio sized panel centered at the world origin, tilted by
    /// `tilt_deg` about the world x axis (world z is up, the viewer stands
    /// toward -y).
    pub fn surface_studio(tilt_deg: f64) -> Self {
        let (s, c) = tilt_deg.to_radians().sin_cos();
        SurfaceGeometry {
            center: Vec3::zeros(),
            axis_x: Vec3::x(),
            axis_z: Vec3::new(0.0, -s, c),
            width: SURFACE_STUDIO_SIZE.0,
            height: SURFACE_STUDIO_SIZE.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !finite(&self.center) || !finite(&self.axis_x) || !finite(&self.axis_z) {
            return Err(Error::invalid("surface", "non-finite component"));
        }
        if (self.axis_x.norm() - 1.0).abs() > UNIT_TOL || (self.axis_z.norm() - 1.0).abs() > UNIT_TOL
        {
            return Err(Error::invalid("surface", "axes must be unit length"));
        }
        if self.axis_x.dot(&self.axis_z).abs() >= UNIT_TOL {
            return Err(Error::invalid("surface", "axis_x and axis_z are not orthogonal"));
        }
        if !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite())
        {
            return Err(Error::invalid("surface", "width and height must be positive"));
        }
        Ok(())
    }

    /// Signed distance of `p` to the surface plane, positive above.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (p - self.center).dot(&self.axis_z)
    }

    /// Surface-local coordinates `(u, v, signed distance)`.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let d = p - self.center;
        let y = self.axis_z.cross(&self.axis_x);
        Vec3::new(d.dot(&self.axis_x), d.dot(&y), d.dot(&self.axis_z))
    }

    /// World position of the surface-local point `(u, v)` on the plane.
    pub fn on_plane(&self, u: f64, v: f64) -> Vec3 {
        let y = self.axis_z.cross(&self.axis_x);
        self.center + self.axis_x * u + y * v
    }

    pub fn corner_bl(&self) -> Vec3 {
        self.on_plane(-0.5 * self.width, -0.5 * self.height)
    }

    pub fn corner_tr(&self) -> Vec3 {
        self.on_plane(0.5 * self.width, 0.5 * self.height)
    }

    /// Corners in counter-clockwise order starting bottom-left.
    pub fn corners(&self) -> [Vec3; 4] {
        let (hw, hh) = (0.5 * self.width, 0.5 * self.height);
        [
            self.on_plane(-hw, -hh),
            self.on_plane(hw, -hh),
            self.on_plane(hw, hh),
            self.on_plane(-hw, hh),
        ]
    }
}

/// Completes the surface axes to a right-handed orthonormal frame with
/// `y = z × x`.
pub fn surface_frame(surface: &SurfaceGeometry) -> Result<Frame> {
    surface.validate()?;
    Ok(Frame {
        x: surface.axis_x,
        y: surface.axis_z.cross(&surface.axis_x),
        z: surface.axis_z,
    })
}

/// Tracked head of the viewer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub position: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze: Option<Vec3>,
}

impl HeadPose {
    pub fn at(position: Vec3) -> Self {
        HeadPose {
            position,
            gaze: None,
        }
    }
}

/// Per-frame surface camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSetup {
    /// World-to-camera rotation; rows are the camera axes.
    pub view_rotation: Matrix3<f64>,
    pub eye: Vec3,
    /// Surface corners and center in camera-local coordinates.
    pub corner_bl: Vec3,
    pub corner_tr: Vec3,
    pub surface_center: Vec3,
    pub near: f64,
    pub far: f64,
    pub projection: Matrix4<f64>,
}

/// Off-axis perspective matrix whose near plane passes through the two
/// camera-local corners `bl` and `tr` at distance `near`.
pub fn oblique_projection(bl: &Vec3, tr: &Vec3, near: f64, far: f64) -> Matrix4<f64> {
    let w = tr.x - bl.x;
    let h = tr.y - bl.y;
    let depth = far - near;
    Matrix4::new(
        2.0 * near / w,
        0.0,
        (tr.x + bl.x) / w,
        0.0,
        0.0,
        2.0 * near / h,
        (tr.y + bl.y) / h,
        0.0,
        0.0,
        0.0,
        -(far + near) / depth,
        -2.0 * far * near / depth,
        0.0,
        0.0,
        -1.0,
        0.0,
    )
}

/// Normalized device coordinates of a projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ndc {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    /// In front of the eye and inside the clip cube.
    pub inside: bool,
}

impl ProjectionSetup {
    /// Rebuilds the projection matrix from the stored corners and planes.
    pub fn recompute_projection(&self) -> Matrix4<f64> {
        oblique_projection(&self.corner_bl, &self.corner_tr, self.near, self.far)
    }

    /// World-to-camera rigid transform as a homogeneous matrix.
    pub fn view_matrix(&self) -> Matrix4<f64> {
        let mut m = self.view_rotation.to_homogeneous();
        let t = -(self.view_rotation * self.eye);
        m[(0, 3)] = t.x;
        m[(1, 3)] = t.y;
        m[(2, 3)] = t.z;
        m
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.view_rotation * (p - self.eye)
    }

    /// Homogeneous projection followed by the perspective divide.
    pub fn project(&self, p: &Vec3) -> Result<Ndc> {
        let local = self.to_camera(p);
        let clip = self.projection * Vector4::new(local.x, local.y, local.z, 1.0);
        if clip.w == 0.0 {
            return Err(Error::Degenerate(format!(
                "point {p:?} lies in the eye plane"
            )));
        }
        let ndc = Ndc {
            x: clip.x / clip.w,
            y: clip.y / clip.w,
            depth: clip.z / clip.w,
            inside: false,
        };
        Ok(Ndc {
            inside: clip.w > 0.0
                && ndc.x.abs() <= 1.0
                && ndc.y.abs() <= 1.0
                && ndc.depth.abs() <= 1.0,
            ..ndc
        })
    }
}

/// Derives the surface camera for the current head position.
///
/// The camera sits at the head, looks down the surface normal, shares the
/// surface's horizontal axis and uses the surface rectangle as its near
/// plane. `far` is measured from the eye.
pub fn compute_surface_camera(
    head: &HeadPose,
    surface: &SurfaceGeometry,
    far: f64,
) -> Result<ProjectionSetup> {
    let frame = surface_frame(surface)?;
    if !head.position.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid("head", "non-finite position"));
    }
    if surface.signed_distance(&head.position) <= 0.0 {
        return Err(Error::Geometry(
            "head must be strictly above the surface plane".into(),
        ));
    }
    let rotation = frame.rotation();
    let eye = head.position;
    let local = |p: Vec3| rotation * (p - eye);
    let surface_center = local(surface.center);
    let corner_bl = local(surface.corner_bl());
    let corner_tr = local(surface.corner_tr());
    let near = -surface_center.z;
    if !(far > near) || !far.is_finite() {
        return Err(Error::invalid(
            "far plane",
            format!("far {far} must exceed the head-to-surface distance {near}"),
        ));
    }
    Ok(ProjectionSetup {
        view_rotation: rotation,
        eye,
        corner_bl,
        corner_tr,
        surface_center,
        near,
        far,
        projection: oblique_projection(&corner_bl, &corner_tr, near, far),
    })
}

/// Free-function form of [`ProjectionSetup::project`].
pub fn project_to_surface(point: &Vec3, setup: &ProjectionSetup) -> Result<Ndc> {
    setup.project(point)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Degenerate("zero ray direction".into()));
        }
        Ok(Ray {
            origin,
            direction: direction / n,
        })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Ray from a surface contact point away from the head, into the data
/// below the surface.
pub fn surface_ray(sample: &Vec3, head: &HeadPose) -> Result<Ray> {
    let d = sample - head.position;
    if d.norm() == 0.0 {
        return Err(Error::Degenerate("surface sample coincides with the head".into()));
    }
    Ray::new(*sample, d)
}

/// Whether `point` lies on the surface rectangle within `eps` of the plane.
pub fn point_in_surface_rect(point: &Vec3, surface: &SurfaceGeometry, eps: f64) -> bool {
    let l = surface.to_local(point);
    l.z.abs() <= eps && l.x.abs() <= 0.5 * surface.width && l.y.abs() <= 0.5 * surface.height
}

/// Rigid transform into a surface's frame: surface center at the origin,
/// surface axes along the coordinate axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidFrame {
    pub origin: Vec3,
    pub rotation: Matrix3<f64>,
}

impl RigidFrame {
    pub fn of_surface(surface: &SurfaceGeometry) -> Result<Self> {
        Ok(RigidFrame {
            origin: surface.center,
            rotation: surface_frame(surface)?.rotation(),
        })
    }

    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation * (p - self.origin)
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * p + self.origin
    }
}

/// Surface, head and optional far distance, as read from a scene document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub surface: SurfaceGeometry,
    pub head: HeadPose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far: Option<f64>,
}

impl Scene {
    /// Surface Studio panel at the default incline, viewer about half a
    /// meter above it.
    pub fn surface_studio_default() -> Self {
        Scene {
            surface: SurfaceGeometry::surface_studio(DEFAULT_TILT_DEG),
            head: HeadPose::at(Vec3::new(0.0, -0.45, 0.40)),
            far: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.surface.validate()?;
        if self.surface.signed_distance(&self.head.position) <= 0.0 {
            return Err(Error::Geometry(
                "head must be strictly above the surface plane".into(),
            ));
        }
        if let Some(f) = self.far {
            if !(f > 0.0) {
                return Err(Error::invalid("far plane", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn frame(&self) -> Result<RigidFrame> {
        RigidFrame::of_surface(&self.surface)
    }

    /// The same scene expressed in the surface frame.
    pub fn localized(&self) -> Result<Scene> {
        let frame = self.frame()?;
        Ok(Scene {
            surface: SurfaceGeometry::canonical(self.surface.width, self.surface.height),
            head: HeadPose {
                position: frame.to_local(&self.head.position),
                gaze: self.head.gaze.map(|g| frame.rotation * g),
            },
            far: self.far,
        })
    }
}
