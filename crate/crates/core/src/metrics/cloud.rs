use nalgebra::Point3;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{KdTree, MetricsError};
use crate::geometry::Aabb;

/// F-score distance thresholds used for reporting.
pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.1, 0.05, 0.02];

/// Euclidean distance from every point of `from` to its nearest neighbour in `to`.
pub fn nearest_distances(from: &[Point3<f64>], to: &KdTree) -> Vec<f64> {
    from.iter()
        .map(|p| to.nearest(p).map_or(f64::INFINITY, |(_, d2)| d2.sqrt()))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_non_empty(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<(), MetricsError> {
    if a.is_empty() || b.is_empty() {
        Err(MetricsError::EmptyCloud)
    } else {
        Ok(())
    }
}

/// Symmetric Chamfer distance: half the sum of the mean (non-squared)
/// nearest-neighbour distances in both directions.
pub fn chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64, MetricsError> {
    check_non_empty(a, b)?;
    let (ta, tb) = (KdTree::build(a), KdTree::build(b));
    Ok(chamfer_with_trees(a, &ta, b, &tb))
}

pub(crate) fn chamfer_with_trees(
    a: &[Point3<f64>],
    ta: &KdTree,
    b: &[Point3<f64>],
    tb: &KdTree,
) -> f64 {
    0.5 * (mean(&nearest_distances(a, tb)) + mean(&nearest_distances(b, ta)))
}

/// F-score at distance `tau`: precision is the fraction of `pred` within
/// `tau` of `gt`, recall the fraction of `gt` within `tau` of `pred`.
pub fn fscore(pred: &[Point3<f64>], gt: &[Point3<f64>], tau: f64) -> Result<f64, MetricsError> {
    check_non_empty(pred, gt)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(MetricsError::InvalidThreshold(tau));
    }
    let to_gt = nearest_distances(pred, &KdTree::build(gt));
    let to_pred = nearest_distances(gt, &KdTree::build(pred));
    Ok(fscore_from_distances(&to_gt, &to_pred, tau))
}

pub(crate) fn fscore_from_distances(pred_to_gt: &[f64], gt_to_pred: &[f64], tau: f64) -> f64 {
    let frac = |d: &[f64]| d.iter().filter(|&&x| x <= tau).count() as f64 / d.len() as f64;
    let (p, r) = (frac(pred_to_gt), frac(gt_to_pred));
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Draws `n` points: without replacement when `n <= |cloud|` (a random
/// subset, or a permutation when equal), uniformly with replacement
/// otherwise. Deterministic for a given seed.
pub fn sample_points(
    cloud: &[Point3<f64>],
    n: usize,
    seed: u64,
) -> Result<Vec<Point3<f64>>, MetricsError> {
    if cloud.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    Ok(sample_indices(cloud.len(), n, seed).into_iter().map(|i| cloud[i]).collect())
}

/// Index draw behind [`sample_points`]; `len` must be positive.
pub(crate) fn sample_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n <= len {
        index::sample(&mut rng, len, n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..len)).collect()
    }
}

/// Scale factor that brings the bounding-box diagonal of `cloud` to 1
/// (1 for empty or single-point clouds).
pub fn normalize_by_diagonal(cloud: &[Point3<f64>]) -> f64 {
    let d = Aabb::from_points(cloud).diagonal();
    if d > 0.0 {
        1.0 / d
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    #[test]
    fn chamfer_basic_cases() {
        let a = vec![p(0.0, 0.0, 0.0), p(1.0, 2.0, 3.0)];
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer(&[p(0.0, 0.0, 0.0)], &[p(1.0, 0.0, 0.0)]).unwrap(), 1.0);
        assert_eq!(chamfer(&a, &[]), Err(MetricsError::EmptyCloud));
    }

    #[test]
    fn fscore_basic_cases() {
        let a = vec![p(0.0, 0.0, 0.0), p(1.0, 2.0, 3.0)];
        for tau in DEFAULT_THRESHOLDS {
            assert_eq!(fscore(&a, &a, tau).unwrap(), 1.0);
        }
        let far = vec![p(10.0, 0.0, 0.0)];
        assert_eq!(fscore(&a, &far, 0.1).unwrap(), 0.0);
        // Precision 1/2, recall 1.
        let pred = vec![p(0.0, 0.0, 0.0), p(10.0, 0.0, 0.0)];
        let gt = vec![p(0.0, 0.0, 0.0)];
        assert!((fscore(&pred, &gt, 0.1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // Roles swapped: precision 1, recall 1/2, same harmonic mean.
        assert!((fscore(&gt, &pred, 0.1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(fscore(&a, &a, 0.0), Err(MetricsError::InvalidThreshold(0.0)));
    }

    #[test]
    fn chamfer_and_fscore_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cloud = |rng: &mut ChaCha8Rng| -> Vec<Point3<f64>> {
            (0..50)
                .map(|_| p(rng.random(), rng.random(), rng.random()))
                .collect()
        };
        let (a, b) = (cloud(&mut rng), cloud(&mut rng));
        let nn = |x: &Point3<f64>, set: &[Point3<f64>]| {
            set.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)
        };
        let ab: Vec<f64> = a.iter().map(|x| nn(x, &b)).collect();
        let ba: Vec<f64> = b.iter().map(|x| nn(x, &a)).collect();
        let want = 0.5 * (ab.iter().sum::<f64>() / 50.0 + ba.iter().sum::<f64>() / 50.0);
        assert!((chamfer(&a, &b).unwrap() - want).abs() < 1e-12);
        assert_eq!(chamfer(&a, &b).unwrap(), chamfer(&b, &a).unwrap());
        let tau = 0.1;
        let prec = ab.iter().filter(|&&d| d <= tau).count() as f64 / 50.0;
        let rec = ba.iter().filter(|&&d| d <= tau).count() as f64 / 50.0;
        let want_fs = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        assert!((fscore(&a, &b, tau).unwrap() - want_fs).abs() < 1e-12);
    }

    #[test]
    fn sampling_modes() {
        let cloud: Vec<_> = (0..10).map(|i| p(i as f64, 0.0, 0.0)).collect();
        let mut perm = sample_points(&cloud, 10, 3).unwrap();
        perm.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert_eq!(perm, cloud);
        assert_eq!(sample_points(&cloud, 4, 9).unwrap(), sample_points(&cloud, 4, 9).unwrap());
        assert_eq!(sample_points(&[], 4, 9), Err(MetricsError::EmptyCloud));

        // Two-point cloud, 10000 draws with replacement: each point's share
        // lies within 3 sigma of 0.5 (sigma = sqrt(0.25 / 10000) = 0.005).
        let two = vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)];
        let s = sample_points(&two, 10_000, 42).unwrap();
        let share = s.iter().filter(|q| q.x == 0.0).count() as f64 / 10_000.0;
        assert!((share - 0.5).abs() <= 3.0 * 0.005, "share {share}");
    }
}
