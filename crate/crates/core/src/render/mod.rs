//! Cameras, LaRI maps and the multi-hit renderer.

mod camera;
mod maps;
mod renderer;

pub use camera::{is_rotation, Intrinsics, PinholeCamera};
pub use maps::{
    index_from_logits, mask_from_index, select_points, select_points_in_layers, IntersectionMask,
    LariMap, StoppingIndexMap, StoppingLogits,
};
pub use renderer::{
    render_lari, LariRender, RenderOptions, RenderStats, DEFAULT_LAYERS, DEFAULT_RESOLUTION,
};

use thiserror::Error;

use crate::geometry::GeometryError;

/// Largest layer count representable by 8-bit stopping indices.
pub const MAX_LAYERS: usize = 255;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("invalid intrinsics {0:?}: need fx, fy > 0 and the principal point inside the image")]
    InvalidIntrinsics(Intrinsics),
    #[error("camera rotation is not orthonormal with determinant +1")]
    InvalidRotation,
    #[error("look-at target coincides with the eye or is parallel to the up vector")]
    DegenerateLookAt,
    #[error("layer count must be in 1..={MAX_LAYERS}, got {0}")]
    InvalidLayerCount(usize),
    #[error("stopping index {value} exceeds layer count {layers}")]
    IndexOutOfRange { value: u8, layers: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mask is not a per-pixel prefix at pixel ({row}, {col})")]
    NotPrefix { row: usize, col: usize },
    #[error("logits contain a non-finite value at flat index {0}")]
    NonFiniteLogits(usize),
    #[error("worker pool: {0}")]
    WorkerPool(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
