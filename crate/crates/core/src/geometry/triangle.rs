use nalgebra::Point3;

use super::Ray;

/// Slack on the barycentric inside test. A ray through a shared edge is then
/// reported by both adjacent triangles (and merged by deduplication) instead of
/// slipping between them.
pub const BARYCENTRIC_EPSILON: f64 = 1e-9;

/// Below this normalized determinant the ray is treated as lying in the
/// triangle's plane and no hit is reported.
const PARALLEL_EPSILON: f64 = 1e-14;

/// Möller–Trumbore ray/triangle test in double precision with an inclusive,
/// slightly widened barycentric test. Returns the ray parameter of the hit.
#[inline]
pub fn intersect_triangle(ray: &Ray, tri: &[Point3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let d = ray.direction();
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= PARALLEL_EPSILON * scale {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin() - tri[0];
    let u = s.dot(&p) * inv;
    if !(-BARYCENTRIC_EPSILON..=1.0 + BARYCENTRIC_EPSILON).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < -BARYCENTRIC_EPSILON || u + v > 1.0 + BARYCENTRIC_EPSILON {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if t < ray.t_min() || t > ray.t_max() {
        return None;
    }
    Some(t)
}
