//! Layered ray-intersection (LaRI) ground truth for triangle meshes.
//!
//! A LaRI map records every depth-ordered ray/surface intersection behind each
//! pixel instead of only the first one. This crate renders such maps from
//! meshes with an exhaustive multi-hit BVH ray caster and ships the tooling
//! around them:
//!
//! * [`geometry`]: triangle meshes, rays, the BVH and multi-hit queries.
//! * [`render`]: pinhole cameras, LaRI maps, stopping indices and masks.
//! * [`metrics`]: scale-shift alignment, losses, Chamfer / F-score,
//!   trimmed ICP, canonical registration and mask metrics.
//! * [`curation`]: per-object layer statistics, filters and view sampling.
//! * [`io`]: OBJ/PLY loading, the `.lari` container, PLY export and pose
//!   convention conversion.
//! * [`shapes`]: procedural test meshes (boxes, spheres, tori).

pub mod curation;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod render;
pub mod shapes;

pub use nalgebra::{Matrix3, Matrix4, Point3, Vector3};

/// Point type used throughout the crate (scene units, `f64`).
pub type Point = Point3<f64>;
