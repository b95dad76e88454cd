use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Normal matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Least-squares scale (all axes) and z-shift mapping a prediction onto the
/// ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    #[serde(rename = "s")]
    pub scale: f64,
    #[serde(rename = "t")]
    pub shift: f64,
    #[serde(skip)]
    pub residual_rms: f64,
}

impl AlignmentResult {
    pub const IDENTITY: AlignmentResult = AlignmentResult {
        scale: 1.0,
        shift: 0.0,
        residual_rms: 0.0,
    };

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::new(
            self.scale * p.x,
            self.scale * p.y,
            self.scale * p.z + self.shift,
        )
    }
}

/// `sum ||s * p + t * z - g||^2`.
pub fn alignment_objective(pred: &[Point3<f64>], gt: &[Point3<f64>], s: f64, t: f64) -> f64 {
    pred.iter()
        .zip(gt)
        .map(|(p, g)| (s * p.coords + Vector3::new(0.0, 0.0, t) - g.coords).norm_squared())
        .sum()
}

/// Solves `min_{s,t} sum ||s * p_i + t * z - g_i||^2` over index-paired
/// points in closed form.
///
/// The 2x2 normal equations `[sum |p|^2, sum p_z; sum p_z, N] (s, t) =
/// (sum <p, g>, sum g_z)` are solved after eliminating `t`, which amounts to
/// centering the z coordinates and keeps the solve well conditioned.
pub fn scale_shift_align(
    pred: &[Point3<f64>],
    gt: &[Point3<f64>],
) -> Result<AlignmentResult, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.len() < 2 {
        return Err(MetricsError::TooFewPoints {
            needed: 2,
            got: pred.len(),
        });
    }
    let n = pred.len() as f64;
    let a: f64 = pred.iter().map(|p| p.coords.norm_squared()).sum();
    let b: f64 = pred.iter().map(|p| p.z).sum();
    // Eigenvalues of [[a, b], [b, n]].
    let half_trace = 0.5 * (a + n);
    let radius = (0.25 * (a - n) * (a - n) + b * b).sqrt();
    let (hi, lo) = (half_trace + radius, half_trace - radius);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(MetricsError::DegenerateSystem { condition });
    }

    let pz_mean = b / n;
    let gz_mean = gt.iter().map(|g| g.z).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (p, g) in pred.iter().zip(gt) {
        let pz = p.z - pz_mean;
        num += p.x * g.x + p.y * g.y + pz * (g.z - gz_mean);
        den += p.x * p.x + p.y * p.y + pz * pz;
    }
    let scale = num / den;
    let shift = gz_mean - scale * pz_mean;
    let residual_rms = (alignment_objective(pred, gt, scale, shift) / n).sqrt();
    Ok(AlignmentResult {
        scale,
        shift,
        residual_rms,
    })
}
