//! Triangle meshes, rays and exhaustive multi-hit ray queries.

mod aabb;
mod bvh;
mod hits;
mod mesh;
mod ray;
mod triangle;

pub use aabb::Aabb;
pub use bvh::{Bvh, BvhNode, MAX_LEAF_SIZE};
pub use hits::{
    brute_force_hits, dedupe_hits, ray_all_hits, ray_all_hits_checked, ray_all_hits_raw, Facing,
    Hit, DEFAULT_DEDUP_EPSILON,
};
pub use mesh::{TriangleMesh, DEGENERATE_AREA};
pub use ray::{Ray, DEFAULT_T_MIN};
pub use triangle::{intersect_triangle, BARYCENTRIC_EPSILON};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("mesh has no valid triangles")]
    EmptyMesh,
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfBounds {
        triangle: usize,
        index: u32,
        vertex_count: usize,
    },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
    #[error("ray direction must be non-zero and finite")]
    InvalidDirection,
    #[error("ray bounds must satisfy t_min < t_max (got {t_min} and {t_max})")]
    InvalidBounds { t_min: f64, t_max: f64 },
}
