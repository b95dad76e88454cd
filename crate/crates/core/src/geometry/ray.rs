use nalgebra::{Point3, Vector3};

use super::GeometryError;

/// Default lower bound on the ray parameter; excludes self-hits at the origin.
pub const DEFAULT_T_MIN: f64 = 1e-6;

/// A half-line `origin + t * direction` with `t` restricted to `[t_min, t_max]`.
/// The direction is stored normalized, so `t` is a distance in scene units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Point3<f64>,
    direction: Vector3<f64>,
    t_min: f64,
    t_max: f64,
}

impl Ray {
    /// Builds a ray with default bounds `[1e-6, inf)`. The direction is normalized.
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>) -> Result<Self, GeometryError> {
        let norm = direction.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(GeometryError::InvalidDirection);
        }
        Ok(Ray {
            origin,
            direction: direction / norm,
            t_min: DEFAULT_T_MIN,
            t_max: f64::INFINITY,
        })
    }

    pub fn with_bounds(mut self, t_min: f64, t_max: f64) -> Result<Self, GeometryError> {
        if t_min.is_nan() || t_max.is_nan() || t_min >= t_max {
            return Err(GeometryError::InvalidBounds { t_min, t_max });
        }
        self.t_min = t_min;
        self.t_max = t_max;
        Ok(self)
    }

    pub fn origin(&self) -> &Point3<f64> {
        &self.origin
    }

    pub fn direction(&self) -> &Vector3<f64> {
        &self.direction
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.origin + self.direction * t
    }

    pub fn inv_direction(&self) -> Vector3<f64> {
        self.direction.map(|c| 1.0 / c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_is_normalized() {
        let r = Ray::new(Point3::origin(), Vector3::new(3.0, 0.0, 4.0)).unwrap();
        assert!((r.direction().norm() - 1.0).abs() < 1e-12);
        assert_eq!(r.t_min(), DEFAULT_T_MIN);
        assert_eq!(r.t_max(), f64::INFINITY);
    }

    #[test]
    fn rejects_zero_direction_and_bad_bounds() {
        assert_eq!(
            Ray::new(Point3::origin(), Vector3::zeros()),
            Err(GeometryError::InvalidDirection)
        );
        let r = Ray::new(Point3::origin(), Vector3::x()).unwrap();
        assert!(r.with_bounds(2.0, 1.0).is_err());
        assert!(r.with_bounds(1.0, 1.0).is_err());
        assert!(r.with_bounds(0.0, 1.0).is_ok());
    }
}
