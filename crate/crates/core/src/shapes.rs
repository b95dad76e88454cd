//! Procedural closed meshes with outward-facing winding.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};

use crate::geometry::TriangleMesh;

/// Axis-aligned box between two corners, 8 vertices and 12 triangles.
pub fn axis_box(min: Point3<f64>, max: Point3<f64>) -> TriangleMesh {
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    let quads = [
        [0, 4, 6, 2],
        [1, 3, 7, 5],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 2, 3, 1],
        [4, 5, 7, 6],
    ];
    let triangles = quads
        .iter()
        .flat_map(|&[a, b, c, d]| [[a, b, c], [a, c, d]])
        .collect();
    TriangleMesh::new(vertices, triangles).expect("box indices are valid")
}

/// Cube with the given center and edge length.
pub fn cube(center: Point3<f64>, size: f64) -> TriangleMesh {
    let h = Vector3::repeat(size / 2.0);
    axis_box(center - h, center + h)
}

/// Geodesic sphere: an icosahedron subdivided `subdivisions` times
/// (`20 * 4^subdivisions` triangles).
pub fn icosphere(center: Point3<f64>, radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vector3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = (vertices[a as usize] + vertices[b as usize]).normalize();
                vertices.push(m);
                vertices.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices: Vec<Point3<f64>> = vertices.iter().map(|v| center + v * radius).collect();
    orient_outward(&vertices, &mut faces, |_| center);
    TriangleMesh::new(vertices, faces).expect("icosphere indices are valid")
}

/// Torus around the y axis with major radius `major` and tube radius `minor`;
/// `2 * major_segments * minor_segments` triangles.
pub fn torus(
    center: Point3<f64>,
    major: f64,
    minor: f64,
    major_segments: usize,
    minor_segments: usize,
) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(major_segments * minor_segments);
    for i in 0..major_segments {
        let phi = 2.0 * PI * i as f64 / major_segments as f64;
        for j in 0..minor_segments {
            let theta = 2.0 * PI * j as f64 / minor_segments as f64;
            let r = major + minor * theta.cos();
            vertices.push(center + Vector3::new(r * phi.cos(), minor * theta.sin(), r * phi.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % major_segments) * minor_segments + j % minor_segments) as u32;
    let mut faces = Vec::with_capacity(2 * major_segments * minor_segments);
    for i in 0..major_segments {
        for j in 0..minor_segments {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    orient_outward(&vertices, &mut faces, |c| {
        let radial = Vector3::new(c.x - center.x, 0.0, c.z - center.z);
        center + radial.normalize() * major
    });
    TriangleMesh::new(vertices, faces).expect("torus indices are valid")
}

/// Flips triangles whose normal points towards `inside(centroid)`.
fn orient_outward(
    vertices: &[Point3<f64>],
    faces: &mut [[u32; 3]],
    inside: impl Fn(&Point3<f64>) -> Point3<f64>,
) {
    for f in faces.iter_mut() {
        let [a, b, c] = f.map(|i| vertices[i as usize]);
        let n = (b - a).cross(&(c - a));
        let centroid = Point3::from((a.coords + b.coords + c.coords) / 3.0);
        if n.dot(&(centroid - inside(&centroid))) < 0.0 {
            f.swap(1, 2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_outward(mesh: &TriangleMesh, inside: impl Fn(&Point3<f64>) -> Point3<f64>) {
        for i in 0..mesh.len() {
            let [a, b, c] = mesh.triangle(i);
            let centroid = Point3::from((a.coords + b.coords + c.coords) / 3.0);
            assert!(mesh.normal(i).dot(&(centroid - inside(&centroid))) > 0.0);
        }
    }

    /// Every undirected edge of a closed manifold is shared by exactly two
    /// triangles, traversed in opposite directions.
    fn assert_closed(mesh: &TriangleMesh) {
        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for t in mesh.triangles() {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            assert_eq!(n, 1);
            assert_eq!(directed.get(&(b, a)), Some(&1));
        }
    }

    #[test]
    fn cube_is_closed_and_outward() {
        let c = Point3::new(0.0, 0.0, 2.0);
        let m = cube(c, 1.0);
        assert_eq!(m.len(), 12);
        assert_outward(&m, |_| c);
        assert_closed(&m);
    }

    #[test]
    fn icosphere_counts_and_orientation() {
        let m = icosphere(Point3::origin(), 2.0, 2);
        assert_eq!(m.len(), 320);
        assert_outward(&m, |_| Point3::origin());
        assert_closed(&m);
        for v in m.vertices() {
            assert!((v.coords.norm() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_is_closed_and_outward() {
        let m = torus(Point3::origin(), 1.0, 0.25, 16, 8);
        assert_eq!(m.len(), 256);
        assert_outward(&m, |c| {
            let r = Vector3::new(c.x, 0.0, c.z).normalize();
            Point3::from(r)
        });
        assert_closed(&m);
    }
}
