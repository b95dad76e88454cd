//! Alignment, losses, point-cloud metrics and registration.

mod align;
mod canonical;
mod cloud;
mod eval;
mod icp;
mod kdtree;
mod loss;
mod mask;

pub use align::{alignment_objective, scale_shift_align, AlignmentResult, MAX_CONDITION};
pub use canonical::{canonical_register, rotation_grid, CanonicalOptions, Registration};
pub use cloud::{
    chamfer, fscore, nearest_distances, normalize_by_diagonal, sample_points, DEFAULT_THRESHOLDS,
};
pub use eval::{
    default_sample_count, evaluate_view_aligned, EvalOptions, MetricsRecord, MetricsReport,
    Prediction, Region, OBJECT_SAMPLES, SCENE_SAMPLES,
};
pub use icp::{trimmed_icp, IcpOutcome, IcpParams, RigidTransform};
pub use kdtree::KdTree;
pub use loss::{cross_entropy_index_loss, lari_loss};
pub use mask::{mask_metrics, MaskScores};

use thiserror::Error;

use crate::render::RenderError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("point lists differ in length ({pred} vs {gt})")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("scale-shift normal equations are singular (condition {condition:e})")]
    DegenerateSystem { condition: f64 },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("distance threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("correspondences are collinear; rotation is undetermined")]
    DegenerateCovariance,
    #[error("all {0} registration initializations failed")]
    AllInitializationsFailed(usize),
    #[error("ground truth has no valid points in the {0} region")]
    EmptyRegion(Region),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Render(#[from] RenderError),
}
