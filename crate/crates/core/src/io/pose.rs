use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::render::{is_rotation, Intrinsics, PinholeCamera};

/// Camera axis convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisConvention {
    /// x right, y down, z forward.
    OpenCv,
    /// x right, y up, z backward.
    OpenGl,
}

/// How the 4x4 matrix is applied to points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixSide {
    /// `p' = M p` with column vectors.
    Column,
    /// `p'^T = p^T M` with row vectors (the transpose of the column form).
    Row,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseDirection {
    CameraToWorld,
    WorldToCamera,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoseConvention {
    pub axes: AxisConvention,
    pub side: MatrixSide,
    pub direction: PoseDirection,
}

impl PoseConvention {
    /// Column-vector OpenCV camera-to-world, the form used by [`PinholeCamera`].
    pub const CANONICAL: PoseConvention = PoseConvention {
        axes: AxisConvention::OpenCv,
        side: MatrixSide::Column,
        direction: PoseDirection::CameraToWorld,
    };

    pub const OPENGL_C2W: PoseConvention = PoseConvention {
        axes: AxisConvention::OpenGl,
        side: MatrixSide::Column,
        direction: PoseDirection::CameraToWorld,
    };

    /// Camera for a pose given in this convention.
    pub fn camera(&self, pose: &Matrix4<f64>, intrinsics: Intrinsics) -> Result<PinholeCamera, IoError> {
        let c2w = to_canonical(pose, self)?;
        let r: Matrix3<f64> = c2w.fixed_view::<3, 3>(0, 0).into();
        let t: Vector3<f64> = c2w.fixed_view::<3, 1>(0, 3).into();
        Ok(PinholeCamera::new(intrinsics, r, t.into())?)
    }
}

fn axis_flip() -> Matrix4<f64> {
    Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, -1.0, 1.0))
}

fn check_rigid(m: &Matrix4<f64>) -> Result<(), IoError> {
    let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
    let bottom_ok = m[(3, 0)].abs() <= 1e-12
        && m[(3, 1)].abs() <= 1e-12
        && m[(3, 2)].abs() <= 1e-12
        && (m[(3, 3)] - 1.0).abs() <= 1e-12;
    if !bottom_ok || !is_rotation(&r) || !m.iter().all(|v| v.is_finite()) {
        return Err(IoError::InvalidRotation);
    }
    Ok(())
}

fn rigid_inverse(m: &Matrix4<f64>) -> Matrix4<f64> {
    let rt: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).transpose();
    let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into();
    let mut out = Matrix4::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-(rt * t)));
    out
}

fn to_canonical(pose: &Matrix4<f64>, from: &PoseConvention) -> Result<Matrix4<f64>, IoError> {
    let mut m = match from.side {
        MatrixSide::Column => *pose,
        MatrixSide::Row => pose.transpose(),
    };
    check_rigid(&m)?;
    if from.direction == PoseDirection::WorldToCamera {
        m = rigid_inverse(&m);
    }
    if from.axes == AxisConvention::OpenGl {
        m *= axis_flip();
    }
    Ok(m)
}

fn from_canonical(c2w: &Matrix4<f64>, to: &PoseConvention) -> Matrix4<f64> {
    let mut m = *c2w;
    if to.axes == AxisConvention::OpenGl {
        m *= axis_flip();
    }
    if to.direction == PoseDirection::WorldToCamera {
        m = rigid_inverse(&m);
    }
    match to.side {
        MatrixSide::Column => m,
        MatrixSide::Row => m.transpose(),
    }
}

/// Re-expresses a camera pose so it describes the same physical camera (the
/// same world-space rays) under another convention.
///
/// Row-vector matrices are the transpose of column-vector ones,
/// world-to-camera is the rigid inverse of camera-to-world, and switching
/// between OpenCV and OpenGL axes right-multiplies a camera-to-world pose by
/// `diag(1, -1, -1, 1)`.
pub fn convert_pose(
    pose: &Matrix4<f64>,
    from: &PoseConvention,
    to: &PoseConvention,
) -> Result<Matrix4<f64>, IoError> {
    if from == to {
        let column = match from.side {
            MatrixSide::Column => *pose,
            MatrixSide::Row => pose.transpose(),
        };
        check_rigid(&column)?;
        return Ok(*pose);
    }
    Ok(from_canonical(&to_canonical(pose, from)?, to))
}
