use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use rayon::prelude::*;

use super::cloud::{chamfer_with_trees, sample_indices};
use super::eval::compare;
use super::icp::icp_with_tree;
use super::{
    normalize_by_diagonal, IcpParams, KdTree, MetricsError, MetricsReport, Region, RigidTransform,
    DEFAULT_THRESHOLDS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalOptions {
    /// Rotations about the vertical (y) axis.
    pub yaw_steps: usize,
    /// Rotations about the x axis, applied before the yaw.
    pub pitch_steps: usize,
    /// ICP settings for the refinement on the full clouds.
    pub icp: IcpParams,
    /// Points per cloud in the coarse search over all initializations.
    pub coarse_points: usize,
    pub coarse_iterations: usize,
    /// Number of coarse winners refined on the full clouds.
    pub refine_top: usize,
    pub thresholds: Vec<f64>,
    pub seed: u64,
    /// Report metrics with the ground-truth bounding-box diagonal scaled to 1.
    pub normalize: bool,
}

impl Default for CanonicalOptions {
    fn default() -> Self {
        CanonicalOptions {
            yaw_steps: 24,
            pitch_steps: 4,
            icp: IcpParams::default(),
            coarse_points: 1500,
            coarse_iterations: 30,
            refine_top: 3,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            seed: 0,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    /// Maps the prediction into the ground-truth frame.
    pub transform: RigidTransform,
    pub report: MetricsReport,
    /// Position of the winning start in [`rotation_grid`].
    pub init_index: usize,
    /// Starts whose ICP failed (e.g. degenerate correspondences).
    pub failed_inits: usize,
}

/// Initial rotations `Ry(yaw) * Rx(pitch)` on an even yaw x pitch grid,
/// yaw-major.
pub fn rotation_grid(yaw_steps: usize, pitch_steps: usize) -> Vec<Matrix3<f64>> {
    let mut out = Vec::with_capacity(yaw_steps * pitch_steps);
    for i in 0..yaw_steps {
        let yaw = std::f64::consts::TAU * i as f64 / yaw_steps as f64;
        for j in 0..pitch_steps {
            let pitch = std::f64::consts::TAU * j as f64 / pitch_steps as f64;
            let r = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw)
                * Rotation3::from_axis_angle(&Vector3::x_axis(), pitch);
            out.push(r.into_inner());
        }
    }
    out
}

fn centroid(points: &[Point3<f64>]) -> Vector3<f64> {
    points.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / points.len() as f64
}

fn rms_radius(points: &[Point3<f64>], c: &Vector3<f64>) -> f64 {
    (points.iter().map(|p| (p.coords - c).norm_squared()).sum::<f64>() / points.len() as f64).sqrt()
}

fn subsample(cloud: &[Point3<f64>], n: usize, seed: u64) -> Vec<Point3<f64>> {
    if cloud.len() <= n {
        cloud.to_vec()
    } else {
        sample_indices(cloud.len(), n, seed).into_iter().map(|i| cloud[i]).collect()
    }
}

fn transformed_chamfer(
    t: &RigidTransform,
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
    dst_tree: &KdTree,
) -> f64 {
    let moved: Vec<_> = src.iter().map(|p| t.apply(p)).collect();
    chamfer_with_trees(&moved, &KdTree::build(&moved), dst, dst_tree)
}

/// Registers `pred` onto `gt` in an unknown frame by brute-force search.
///
/// The prediction is first scaled to the ground truth's RMS radius and
/// centered on its centroid. Every grid rotation then seeds a trimmed ICP on
/// subsampled clouds; the best `refine_top` starts by Chamfer distance are
/// refined on the full clouds and the lowest full Chamfer distance wins,
/// ties going to the earlier start.
pub fn canonical_register(
    pred: &[Point3<f64>],
    gt: &[Point3<f64>],
    opts: &CanonicalOptions,
) -> Result<Registration, MetricsError> {
    for cloud in [pred, gt] {
        if cloud.len() < 3 {
            return Err(MetricsError::TooFewPoints {
                needed: 3,
                got: cloud.len(),
            });
        }
    }
    for &tau in &opts.thresholds {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(MetricsError::InvalidThreshold(tau));
        }
    }
    let (cp, cg) = (centroid(pred), centroid(gt));
    let (rp, rg) = (rms_radius(pred, &cp), rms_radius(gt, &cg));
    if !(rp > 0.0 && rg > 0.0) {
        return Err(MetricsError::DegenerateCovariance);
    }
    let scale = rg / rp;
    let grid = rotation_grid(opts.yaw_steps, opts.pitch_steps);
    let inits: Vec<RigidTransform> = grid
        .iter()
        .map(|r| RigidTransform {
            rotation: *r,
            translation: cg - scale * (r * cp),
            scale,
        })
        .collect();

    let coarse_pred = subsample(pred, opts.coarse_points, opts.seed);
    let coarse_gt = subsample(gt, opts.coarse_points, opts.seed.wrapping_add(1));
    let coarse_tree = KdTree::build(&coarse_gt);
    let coarse_params = IcpParams {
        max_iterations: opts.coarse_iterations,
        ..opts.icp
    };
    let coarse: Vec<Option<(f64, usize, RigidTransform)>> = inits
        .par_iter()
        .enumerate()
        .map(|(i, init)| {
            let out = icp_with_tree(&coarse_pred, &coarse_tree, &coarse_gt, init, &coarse_params)
                .ok()?;
            let cd = transformed_chamfer(&out.transform, &coarse_pred, &coarse_gt, &coarse_tree);
            Some((cd, i, out.transform))
        })
        .collect();
    let failed_inits = coarse.iter().filter(|c| c.is_none()).count();
    let mut ranked: Vec<_> = coarse.into_iter().flatten().collect();
    if ranked.is_empty() {
        return Err(MetricsError::AllInitializationsFailed(inits.len()));
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.truncate(opts.refine_top.max(1));

    let gt_tree = KdTree::build(gt);
    let refined: Vec<Option<(f64, usize, RigidTransform)>> = ranked
        .par_iter()
        .map(|&(_, i, start)| {
            let out = icp_with_tree(pred, &gt_tree, gt, &start, &opts.icp).ok()?;
            Some((transformed_chamfer(&out.transform, pred, gt, &gt_tree), i, out.transform))
        })
        .collect();
    let (_, init_index, transform) = refined
        .into_iter()
        .flatten()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .ok_or(MetricsError::AllInitializationsFailed(inits.len()))?;

    let factor = if opts.normalize {
        normalize_by_diagonal(gt)
    } else {
        1.0
    };
    let moved: Vec<_> = pred.iter().map(|p| transform.apply(p) * factor).collect();
    let target: Vec<_> = gt.iter().map(|p| p * factor).collect();
    Ok(Registration {
        transform,
        report: compare(Region::Overall, &moved, &target, &opts.thresholds, None),
        init_index,
        failed_inits,
    })
}
