use nalgebra::{Matrix3, Point3, Vector3};

use super::{KdTree, MetricsError};

/// Trimmed residuals below this are treated as an exact fit.
const EXACT_FIT: f64 = 1e-24;

/// Similarity transform `p -> scale * rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        RigidTransform {
            rotation,
            ..Self::identity()
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
            scale: self.scale * other.scale,
        }
    }

    /// Orthonormal rotation with det +1 and positive finite scale, to 1e-9.
    pub fn is_valid(&self) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Matrix3::identity()).amax() <= 1e-9
            && (r.determinant() - 1.0).abs() <= 1e-9
            && self.translation.iter().all(|v| v.is_finite())
            && self.scale.is_finite()
            && self.scale > 0.0
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Fraction of source points kept as correspondences each iteration.
    pub overlap: f64,
    pub rel_tol: f64,
    pub estimate_scale: bool,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            max_iterations: 100,
            overlap: 0.8,
            rel_tol: 1e-6,
            estimate_scale: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpOutcome {
    pub transform: RigidTransform,
    /// Mean squared distance over the kept correspondences.
    pub residual: f64,
    /// Trimmed residual per evaluated transform; non-increasing.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Trimmed ICP from `src` onto `dst`, starting at `init`.
///
/// Each iteration pairs every transformed source point with its nearest
/// destination point, keeps the `ceil(overlap * N)` closest pairs and solves
/// for the best similarity (or rigid) transform in closed form.
pub fn trimmed_icp(
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<IcpOutcome, MetricsError> {
    if dst.len() < 3 {
        return Err(MetricsError::TooFewPoints {
            needed: 3,
            got: dst.len(),
        });
    }
    icp_with_tree(src, &KdTree::build(dst), dst, init, params)
}

pub(crate) fn icp_with_tree(
    src: &[Point3<f64>],
    tree: &KdTree,
    dst: &[Point3<f64>],
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<IcpOutcome, MetricsError> {
    if src.len() < 3 {
        return Err(MetricsError::TooFewPoints {
            needed: 3,
            got: src.len(),
        });
    }
    let keep = ((params.overlap.clamp(0.0, 1.0) * src.len() as f64).ceil() as usize)
        .clamp(3, src.len());

    let mut current = *init;
    let mut best: Option<(RigidTransform, f64)> = None;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut pairs: Vec<(f64, u32, u32)> = Vec::with_capacity(src.len());
    loop {
        pairs.clear();
        for (i, p) in src.iter().enumerate() {
            let q = current.apply(p);
            let (j, d2) = tree.nearest(&q).expect("non-empty tree");
            pairs.push((d2, i as u32, j as u32));
        }
        if keep < pairs.len() {
            pairs.select_nth_unstable_by(keep - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            pairs.truncate(keep);
        }
        let residual = pairs.iter().map(|p| p.0).sum::<f64>() / keep as f64;
        if let Some((_, prev)) = best {
            if residual > prev {
                break;
            }
            if prev - residual <= params.rel_tol * prev {
                best = Some((current, residual));
                history.push(residual);
                converged = true;
                break;
            }
        }
        best = Some((current, residual));
        history.push(residual);
        if residual < EXACT_FIT {
            converged = true;
            break;
        }
        if iterations == params.max_iterations {
            break;
        }
        let a: Vec<Point3<f64>> = pairs.iter().map(|p| src[p.1 as usize]).collect();
        let b: Vec<Point3<f64>> = pairs.iter().map(|p| dst[p.2 as usize]).collect();
        let fixed_scale = (!params.estimate_scale).then_some(current.scale);
        current = umeyama(&a, &b, fixed_scale)?;
        iterations += 1;
    }
    let (transform, residual) = best.expect("at least one evaluation");
    Ok(IcpOutcome {
        transform,
        residual,
        history,
        iterations,
        converged,
    })
}

/// Least-squares similarity transform mapping `a[i]` onto `b[i]`, with the
/// scale either estimated (`None`) or held fixed.
pub(crate) fn umeyama(
    a: &[Point3<f64>],
    b: &[Point3<f64>],
    fixed_scale: Option<f64>,
) -> Result<RigidTransform, MetricsError> {
    let n = a.len() as f64;
    let mean_a = a.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / n;
    let mean_b = b.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / n;
    let mut cov = Matrix3::zeros();
    let mut var_a = 0.0;
    for (p, q) in a.iter().zip(b) {
        let (pa, qb) = (p.coords - mean_a, q.coords - mean_b);
        cov += qb * pa.transpose();
        var_a += pa.norm_squared();
    }
    cov /= n;
    var_a /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let sv = &svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    if sv[order[0]].is_nan() || sv[order[0]] <= 0.0 || sv[order[1]] < 1e-12 * sv[order[0]] {
        return Err(MetricsError::DegenerateCovariance);
    }
    // Reflection fix on the weakest direction.
    let mut d = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        d[(order[2], order[2])] = -1.0;
    }
    let rotation = u * d * v_t;
    let scale = fixed_scale
        .unwrap_or_else(|| sv.component_mul(&d.diagonal()).sum() / var_a);
    Ok(RigidTransform {
        rotation,
        translation: mean_b - scale * (rotation * mean_a),
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn box_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect()
    }

    fn random_transform(rng: &mut ChaCha8Rng, max_deg: f64) -> RigidTransform {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let angle = rng.random_range(0.0..max_deg).to_radians();
        RigidTransform {
            rotation: Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner(),
            translation: Vector3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
            ),
            scale: 1.0,
        }
    }

    fn rotation_error(a: &RigidTransform, b: &RigidTransform) -> f64 {
        RigidTransform::from_rotation(a.rotation.transpose() * b.rotation).angle()
    }

    #[test]
    fn umeyama_recovers_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = box_cloud(&mut rng, 30);
        let mut t = random_transform(&mut rng, 170.0);
        t.scale = 2.5;
        let dst: Vec<_> = src.iter().map(|p| t.apply(p)).collect();
        let got = umeyama(&src, &dst, None).unwrap();
        assert!(got.is_valid());
        assert!(rotation_error(&got, &t) < 1e-9);
        assert!((got.scale - 2.5).abs() < 1e-12);
        assert!((got.translation - t.translation).norm() < 1e-12);
    }

    #[test]
    fn recovers_transforms_within_twenty_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params = IcpParams {
            overlap: 1.0,
            ..IcpParams::default()
        };
        for _ in 0..5 {
            let src = box_cloud(&mut rng, 400);
            let t = random_transform(&mut rng, 20.0);
            let dst: Vec<_> = src.iter().map(|p| t.apply(p)).collect();
            let out = trimmed_icp(&src, &dst, &RigidTransform::identity(), &params).unwrap();
            assert!(out.transform.is_valid());
            assert!(rotation_error(&out.transform, &t) < 1e-6, "{out:?}");
            assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn identical_clouds_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = box_cloud(&mut rng, 100);
        let out = trimmed_icp(&src, &src, &RigidTransform::identity(), &IcpParams::default()).unwrap();
        assert_eq!(out.transform, RigidTransform::identity());
        assert_eq!(out.residual, 0.0);
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn trimming_rejects_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inliers = box_cloud(&mut rng, 700);
        let t = random_transform(&mut rng, 10.0);
        let dst: Vec<_> = inliers.iter().map(|p| t.apply(p)).collect();
        let mut src = inliers.clone();
        src.extend((0..300).map(|_| {
            Point3::new(
                rng.random_range(-4.0..4.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            )
        }));
        let params = IcpParams {
            overlap: 0.7,
            ..IcpParams::default()
        };
        let out = trimmed_icp(&src, &dst, &RigidTransform::identity(), &params).unwrap();
        assert!(rotation_error(&out.transform, &t) < 1e-3, "{out:?}");
        assert!((out.transform.translation - t.translation).norm() < 1e-3);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let line: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let shifted: Vec<_> = line.iter().map(|p| p + Vector3::new(0.0, 0.5, 0.0)).collect();
        assert_eq!(
            trimmed_icp(&line, &shifted, &RigidTransform::identity(), &IcpParams::default()),
            Err(MetricsError::DegenerateCovariance)
        );
        assert!(matches!(
            trimmed_icp(&line[..2], &line, &RigidTransform::identity(), &IcpParams::default()),
            Err(MetricsError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn compose_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut a = random_transform(&mut rng, 90.0);
        a.scale = 1.5;
        let b = random_transform(&mut rng, 90.0);
        let p = Point3::new(0.3, -1.2, 2.0);
        assert!((a.compose(&b).apply(&p) - a.apply(&b.apply(&p))).norm() < 1e-12);
    }
}
