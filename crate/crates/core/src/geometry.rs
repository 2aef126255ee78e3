//! Pinhole camera model, camera pose on SE(3), and projection of feature
//! points and the spherical obstacle into pixel and normalized coordinates.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::ibvs::Twist6;

/// Depths at or below this value are treated as behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;

pub type Point3 = nalgebra::Point3<f64>;

/// Pinhole intrinsics with square pixels (`f = f_x = f_y`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub f: f64,
    pub px: f64,
    pub py: f64,
}

impl CameraIntrinsics {
    pub fn new(f: f64, px: f64, py: f64) -> Result<Self> {
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::InvalidParameter("focal length must be positive"));
        }
        if !px.is_finite() || !py.is_finite() {
            return Err(Error::InvalidParameter("principal point must be finite"));
        }
        Ok(Self { f, px, py })
    }
}

/// Pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

impl ImagePoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        libm::hypot(self.u - other.u, self.v - other.v)
    }
}

/// Normalized image-plane coordinates `(X/Z, Y/Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormalizedPoint {
    pub a: f64,
    pub b: f64,
}

impl NormalizedPoint {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn distance_squared(&self, other: &NormalizedPoint) -> f64 {
        let da = self.a - other.a;
        let db = self.b - other.b;
        da * da + db * db
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }
}

/// Pose of the camera frame in the world frame.
///
/// `rotation` holds the camera axes expressed in world coordinates, so a
/// camera-frame point maps to the world as `rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    rotation: Rotation3<f64>,
    translation: Vector3<f64>,
}

impl Default for CameraPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl CameraPose {
    pub const ORTHONORMAL_TOL: f64 = 1e-9;

    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from a rotation matrix, checking `RᵀR = I` and `det R = 1`.
    pub fn from_matrix(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if !(ortho <= Self::ORTHONORMAL_TOL) {
            return Err(Error::InvalidParameter("rotation is not orthonormal"));
        }
        if !((rotation.determinant() - 1.0).abs() <= Self::ORTHONORMAL_TOL) {
            return Err(Error::InvalidParameter("rotation determinant is not +1"));
        }
        if !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("translation must be finite"));
        }
        Ok(Self {
            rotation: Rotation3::from_matrix_unchecked(rotation),
            translation,
        })
    }

    pub fn from_rotation(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Roll/pitch/yaw (radians) in nalgebra's convention: `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64, translation: Vector3<f64>) -> Self {
        Self {
            rotation: Rotation3::from_euler_angles(roll, pitch, yaw),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        self.rotation.matrix()
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Largest entry of `|RᵀR − I|` together with `|det R − 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let r = self.rotation.matrix();
        let ortho = (r.transpose() * r - Matrix3::identity()).amax();
        ortho.max((r.determinant() - 1.0).abs())
    }
}

pub fn world_to_camera(pose: &CameraPose, p: &Point3) -> Point3 {
    Point3::from(pose.rotation.inverse() * (p.coords - pose.translation))
}

pub fn camera_to_world(pose: &CameraPose, p: &Point3) -> Point3 {
    Point3::from(pose.rotation * p.coords + pose.translation)
}

pub fn normalize(q: &ImagePoint, k: &CameraIntrinsics) -> NormalizedPoint {
    NormalizedPoint {
        a: (q.u - k.px) / k.f,
        b: (q.v - k.py) / k.f,
    }
}

pub fn denormalize(p: &NormalizedPoint, k: &CameraIntrinsics) -> ImagePoint {
    ImagePoint {
        u: k.f * p.a + k.px,
        v: k.f * p.b + k.py,
    }
}

/// Normalized projection of a camera-frame point, together with its depth.
pub fn project_normalized(p_cam: &Point3) -> Result<(NormalizedPoint, f64)> {
    let z = p_cam.z;
    if !(z > MIN_DEPTH) {
        return Err(Error::NonPositiveDepth { depth: z });
    }
    Ok((NormalizedPoint::new(p_cam.x / z, p_cam.y / z), z))
}

pub fn project_to_pixel(p_cam: &Point3, k: &CameraIntrinsics) -> Result<(ImagePoint, f64)> {
    let (n, z) = project_normalized(p_cam)?;
    Ok((denormalize(&n, k), z))
}

/// Skew-symmetric cross-product matrix.
pub(crate) fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Advances the pose by `exp(dt·V)` with the twist expressed in the current
/// camera frame (right multiplication on SE(3)).
pub fn integrate_twist(pose: &CameraPose, twist: &Twist6, dt: f64) -> CameraPose {
    let rho = twist.linear() * dt;
    let phi = twist.angular() * dt;
    let theta = phi.norm();
    let w = hat(&phi);
    let w2 = w * w;

    // Left Jacobian of SO(3); series expansion near zero.
    let (c1, c2) = if theta < 1e-6 {
        let t2 = theta * theta;
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t2 = theta * theta;
        (
            (1.0 - libm::cos(theta)) / t2,
            (theta - libm::sin(theta)) / (t2 * theta),
        )
    };
    let jac = Matrix3::identity() + w * c1 + w2 * c2;
    let delta_t = jac * rho;
    let delta_r = Rotation3::new(phi);

    let mut rotation = pose.rotation * delta_r;
    rotation.renormalize();
    CameraPose {
        rotation,
        translation: pose.translation + pose.rotation * delta_t,
    }
}

/// Waypoint of the obstacle schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub time: f64,
    pub center: Point3,
}

/// Rigid spherical obstacle following a piecewise-linear schedule in the
/// world frame. The center is held at the first/last waypoint outside the
/// scheduled time range.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    radius: f64,
    waypoints: Vec<Waypoint>,
}

impl Obstacle {
    pub fn new(radius: f64, waypoints: Vec<Waypoint>) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter("obstacle radius must be positive"));
        }
        if waypoints.is_empty() {
            return Err(Error::InvalidParameter("obstacle schedule needs a waypoint"));
        }
        if waypoints.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::InvalidParameter(
                "obstacle waypoint times must be strictly increasing",
            ));
        }
        Ok(Self { radius, waypoints })
    }

    pub fn stationary(radius: f64, center: Point3) -> Result<Self> {
        Self::new(radius, alloc::vec![Waypoint { time: 0.0, center }])
    }

    /// Straight-line motion at constant velocity starting at `t = 0`.
    pub fn constant_velocity(
        radius: f64,
        start: Point3,
        velocity: Vector3<f64>,
        duration: f64,
    ) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::InvalidParameter("duration must be positive"));
        }
        Self::new(
            radius,
            alloc::vec![
                Waypoint {
                    time: 0.0,
                    center: start
                },
                Waypoint {
                    time: duration,
                    center: start + velocity * duration,
                },
            ],
        )
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    /// Same schedule rigidly shifted so that it starts at `start`.
    pub fn relocated(&self, start: Point3) -> Self {
        let offset = start - self.waypoints[0].center;
        Self {
            radius: self.radius,
            waypoints: self
                .waypoints
                .iter()
                .map(|w| Waypoint {
                    time: w.time,
                    center: w.center + offset,
                })
                .collect(),
        }
    }

    pub fn center_at(&self, t: f64) -> Point3 {
        let first = &self.waypoints[0];
        if t <= first.time {
            return first.center;
        }
        for pair in self.waypoints.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if t <= b.time {
                let s = (t - a.time) / (b.time - a.time);
                return a.center + (b.center - a.center) * s;
            }
        }
        self.waypoints[self.waypoints.len() - 1].center
    }
}

/// Projection of the obstacle into the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleImageState {
    /// Normalized projection of the obstacle center.
    pub center: NormalizedPoint,
    /// Normalized radius `R / Z_o`.
    pub rn: f64,
    /// Camera-frame depth of the center.
    pub zo: f64,
    /// Pixel radius `f·R / Z_o`.
    pub r_px: f64,
    /// Metric radius `R`.
    pub radius: f64,
}

impl ObstacleImageState {
    pub fn from_camera_point(
        center_cam: &Point3,
        radius: f64,
        k: &CameraIntrinsics,
    ) -> Result<Self> {
        let (center, zo) = project_normalized(center_cam)?;
        Ok(Self {
            center,
            rn: radius / zo,
            zo,
            r_px: k.f * radius / zo,
            radius,
        })
    }
}

pub fn obstacle_image_state(
    obs: &Obstacle,
    pose: &CameraPose,
    k: &CameraIntrinsics,
    t: f64,
) -> Result<ObstacleImageState> {
    let center_cam = world_to_camera(pose, &obs.center_at(t));
    ObstacleImageState::from_camera_point(&center_cam, obs.radius, k)
}
