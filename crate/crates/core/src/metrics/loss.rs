use super::{scale_shift_align, MetricsError};
use crate::render::{select_points, IntersectionMask, LariMap, StoppingIndexMap, StoppingLogits};

/// Aligned point-map loss: scale-shift align the mask-selected prediction to
/// the ground truth, then average the Euclidean residual norms.
pub fn lari_loss(
    pred: &LariMap,
    gt: &LariMap,
    mask: &IntersectionMask,
) -> Result<f64, MetricsError> {
    if (pred.height(), pred.width(), pred.layers()) != (gt.height(), gt.width(), gt.layers()) {
        return Err(MetricsError::ShapeMismatch(format!(
            "prediction {}x{}x{} vs ground truth {}x{}x{}",
            pred.height(),
            pred.width(),
            pred.layers(),
            gt.height(),
            gt.width(),
            gt.layers()
        )));
    }
    let p = select_points(pred, mask)?;
    let g = select_points(gt, mask)?;
    let align = scale_shift_align(&p, &g)?;
    let total: f64 = p.iter().zip(&g).map(|(p, g)| (align.apply(p) - g).norm()).sum();
    Ok(total / p.len() as f64)
}

/// Mean over pixels of `-log softmax(S)[C]`.
pub fn cross_entropy_index_loss(
    logits: &StoppingLogits,
    target: &StoppingIndexMap,
) -> Result<f64, MetricsError> {
    if (logits.height(), logits.width()) != (target.height(), target.width()) {
        return Err(MetricsError::ShapeMismatch(format!(
            "logits {}x{} vs index {}x{}",
            logits.height(),
            logits.width(),
            target.height(),
            target.width()
        )));
    }
    logits.check_finite()?;
    target.check_layers(logits.layers())?;
    let n = target.as_slice().len();
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = logits
        .pixels()
        .zip(target.as_slice())
        .map(|(s, &c)| {
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - s[c as usize]
        })
        .sum();
    Ok(total / n as f64)
}
