use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::RenderError;
use crate::geometry::Ray;

const ROTATION_TOLERANCE: f64 = 1e-9;

/// Pixel-space pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    /// Square pixels with the principal point at the image center and the
    /// given vertical field of view.
    pub fn from_fov(width: u32, height: u32, fov_y_deg: f64) -> Intrinsics {
        let f = height as f64 / (2.0 * (fov_y_deg.to_radians() / 2.0).tan());
        Intrinsics {
            fx: f,
            fy: f,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    /// Same field of view at a different pixel scale.
    pub fn scaled(&self, factor: u32) -> Intrinsics {
        let s = factor as f64;
        Intrinsics {
            fx: self.fx * s,
            fy: self.fy * s,
            cx: self.cx * s,
            cy: self.cy * s,
            width: self.width * factor,
            height: self.height * factor,
        }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(RenderError::InvalidIntrinsics(*self))
        }
    }
}

/// Checks `R^T R = I` and `det R = +1` to 1e-9.
pub fn is_rotation(m: &Matrix3<f64>) -> bool {
    let orthonormal = (m.transpose() * m - Matrix3::identity()).amax() <= ROTATION_TOLERANCE;
    orthonormal && (m.determinant() - 1.0).abs() <= ROTATION_TOLERANCE
}

/// Pinhole camera in the x-right / y-down / z-forward convention with a
/// camera-to-world pose `p_world = rotation * p_cam + position`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    intrinsics: Intrinsics,
    rotation: Matrix3<f64>,
    position: Point3<f64>,
}

impl PinholeCamera {
    pub fn new(
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        position: Point3<f64>,
    ) -> Result<Self, RenderError> {
        intrinsics.validate()?;
        if !is_rotation(&rotation) {
            return Err(RenderError::InvalidRotation);
        }
        Ok(PinholeCamera {
            intrinsics,
            rotation,
            position,
        })
    }

    /// Camera at `eye` looking at `target`; `up` picks the roll so that the
    /// image y axis points against it.
    pub fn look_at(
        intrinsics: Intrinsics,
        eye: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self, RenderError> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or(RenderError::DegenerateLookAt)?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-9)
            .ok_or(RenderError::DegenerateLookAt)?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        PinholeCamera::new(intrinsics, rotation, eye)
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn position(&self) -> &Point3<f64> {
        &self.position
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width as usize
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height as usize
    }

    /// Same pose, intrinsics replaced.
    pub fn with_intrinsics(&self, intrinsics: Intrinsics) -> Result<Self, RenderError> {
        PinholeCamera::new(intrinsics, self.rotation, self.position)
    }

    /// Unit camera-space direction through the continuous image point `(x, y)`.
    pub fn camera_direction(&self, x: f64, y: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        Vector3::new((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0).normalize()
    }

    /// World-space ray through the continuous image point `(x, y)`.
    pub fn ray_through(&self, x: f64, y: f64) -> Ray {
        let dir = self.rotation * self.camera_direction(x, y);
        Ray::new(self.position, dir).expect("rotated unit vector is a valid direction")
    }

    /// Ray through the center of pixel `(u, v)` (column, row).
    pub fn generate_ray(&self, u: usize, v: usize) -> Ray {
        debug_assert!(u < self.width() && v < self.height());
        self.ray_through(u as f64 + 0.5, v as f64 + 0.5)
    }

    pub fn world_to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (p - self.position))
    }

    /// Yaw about the camera-frame y axis; used to build test poses.
    pub fn yaw(degrees: f64) -> Matrix3<f64> {
        *Rotation3::from_axis_angle(&Vector3::y_axis(), degrees.to_radians()).matrix()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(w: u32, f: f64) -> Intrinsics {
        Intrinsics {
            fx: f,
            fy: f,
            cx: w as f64 / 2.0,
            cy: w as f64 / 2.0,
            width: w,
            height: w,
        }
    }

    #[test]
    fn principal_ray_is_forward() {
        let cam = PinholeCamera::new(square(64, 64.0), Matrix3::identity(), Point3::origin()).unwrap();
        let r = cam.ray_through(32.0, 32.0);
        assert!((r.direction() - Vector3::z()).norm() < 1e-15);
        // Pixel (31, 31) has its center half a pixel up-left of the principal point.
        let r = cam.generate_ray(31, 31);
        assert!(r.direction().x < 0.0 && r.direction().y < 0.0);
    }

    #[test]
    fn offset_by_focal_length_is_45_degrees() {
        let cam = PinholeCamera::new(square(64, 64.0), Matrix3::identity(), Point3::origin()).unwrap();
        let r = cam.ray_through(32.0 + 64.0, 32.0);
        let want = Vector3::new(1.0, 0.0, 1.0) / 2f64.sqrt();
        assert!((r.direction() - want).norm() < 1e-15);
    }

    #[test]
    fn half_turn_yaw_flips_principal_ray() {
        let cam = PinholeCamera::new(
            square(64, 64.0),
            PinholeCamera::yaw(180.0),
            Point3::new(1.0, 2.0, 3.0),
        )
        .unwrap();
        let r = cam.ray_through(32.0, 32.0);
        assert!((r.direction() - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        assert_eq!(r.origin(), &Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let mut k = square(64, 64.0);
        k.cx = 64.0;
        assert!(PinholeCamera::new(k, Matrix3::identity(), Point3::origin()).is_err());
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            PinholeCamera::new(square(8, 8.0), reflect, Point3::origin()),
            Err(RenderError::InvalidRotation)
        ));
    }

    #[test]
    fn look_at_points_the_principal_ray_at_the_target() {
        let eye = Point3::new(3.0, 1.0, -2.0);
        let target = Point3::new(0.0, 0.5, 0.0);
        let cam = PinholeCamera::look_at(square(32, 30.0), eye, target, Vector3::y()).unwrap();
        let r = cam.ray_through(16.0, 16.0);
        assert!((r.direction() - (target - eye).normalize()).norm() < 1e-12);
        // Image "down" has a negative world-up component.
        assert!(cam.rotation().column(1).dot(&Vector3::y()) < 0.0);
        let c = cam.world_to_camera(&target);
        assert!(c.x.abs() < 1e-12 && c.y.abs() < 1e-12 && c.z > 0.0);
    }
}
