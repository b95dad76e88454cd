use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::render::IntersectionMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskScores {
    /// IoU averaged over layers whose union is non-empty.
    pub miou: f64,
    /// DICE over the whole H x W x L volume.
    pub dice: f64,
}

/// Segmentation scores of a predicted intersection mask against ground
/// truth. Two empty masks agree perfectly and score (1, 1).
pub fn mask_metrics(
    pred: &IntersectionMask,
    gt: &IntersectionMask,
) -> Result<MaskScores, MetricsError> {
    let dims = |m: &IntersectionMask| (m.height(), m.width(), m.layers());
    if dims(pred) != dims(gt) {
        return Err(MetricsError::ShapeMismatch(format!(
            "prediction {:?} vs ground truth {:?}",
            dims(pred),
            dims(gt)
        )));
    }
    let layers = gt.layers();
    let mut inter = vec![0usize; layers];
    let mut union = vec![0usize; layers];
    for (k, (&p, &g)) in pred.as_slice().iter().zip(gt.as_slice()).enumerate() {
        let l = k % layers;
        inter[l] += (p && g) as usize;
        union[l] += (p || g) as usize;
    }
    let ious: Vec<f64> = inter
        .iter()
        .zip(&union)
        .filter(|(_, &u)| u > 0)
        .map(|(&i, &u)| i as f64 / u as f64)
        .collect();
    let miou = if ious.is_empty() {
        1.0
    } else {
        ious.iter().sum::<f64>() / ious.len() as f64
    };
    let total = pred.count() + gt.count();
    let dice = if total == 0 {
        1.0
    } else {
        2.0 * inter.iter().sum::<usize>() as f64 / total as f64
    };
    Ok(MaskScores { miou, dice })
}
