use nalgebra::{Point3, Vector3};

use super::{Aabb, GeometryError};

/// Triangles with area at or below this value are dropped on construction.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle soup with unit geometric normals (right-hand rule from the
/// winding order).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vector3<f64>>,
    dropped_degenerate: usize,
}

impl TriangleMesh {
    /// Validates indices and drops degenerate triangles. The number of dropped
    /// triangles is available from [`TriangleMesh::dropped_degenerate`].
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        if let Some(i) = vertices
            .iter()
            .position(|v| !v.coords.iter().all(|c| c.is_finite()))
        {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        let vertex_count = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for (t, tri) in triangles.into_iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i as usize >= vertex_count) {
                return Err(GeometryError::IndexOutOfBounds {
                    triangle: t,
                    index,
                    vertex_count,
                });
            }
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if area <= DEGENERATE_AREA {
                dropped += 1;
                continue;
            }
            kept.push(tri);
            normals.push(cross.normalize());
        }
        Ok(TriangleMesh {
            vertices,
            triangles: kept,
            normals,
            dropped_degenerate: dropped,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn normal(&self, triangle: usize) -> Vector3<f64> {
        self.normals[triangle]
    }

    pub fn triangle(&self, triangle: usize) -> [Point3<f64>; 3] {
        self.triangles[triangle].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_bounds(&self, triangle: usize) -> Aabb {
        Aabb::from_points(&self.triangle(triangle))
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    /// Bounds of the vertices referenced by kept triangles.
    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for tri in &self.triangles {
            for &i in tri {
                b.grow(&self.vertices[i as usize]);
            }
        }
        b
    }

    /// Concatenates two meshes, re-indexing the second.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + offset)));
        let mut normals = self.normals.clone();
        normals.extend_from_slice(&other.normals);
        TriangleMesh {
            vertices,
            triangles,
            normals,
            dropped_degenerate: self.dropped_degenerate + other.dropped_degenerate,
        }
    }

    /// Applies `p -> scale * p + offset` to every vertex. A uniform scale keeps
    /// the winding-derived normals unchanged.
    pub fn transformed(&self, scale: f64, offset: Vector3<f64>) -> TriangleMesh {
        let vertices = self.vertices.iter().map(|v| v * scale + offset).collect();
        TriangleMesh {
            vertices,
            triangles: self.triangles.clone(),
            normals: self.normals.clone(),
            dropped_degenerate: self.dropped_degenerate,
        }
    }
}
