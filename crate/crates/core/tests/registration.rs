use std::time::Instant;

use lari_core::metrics::{canonical_register, CanonicalOptions, RigidTransform};
use lari_core::shapes::torus;
use lari_core::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Area-weighted random samples on a torus mesh with an attached handle so
/// the cloud has no rotational symmetry.
fn object_cloud(n: usize, seed: u64) -> Vec<Point3<f64>> {
    let mesh = torus(Point3::origin(), 1.0, 0.3, 48, 16)
        .merged(&lari_core::shapes::cube(Point3::new(1.2, 0.4, 0.0), 0.5));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let areas: Vec<f64> = (0..mesh.len())
        .map(|i| {
            let [a, b, c] = mesh.triangle(i);
            0.5 * (b - a).cross(&(c - a)).norm()
        })
        .collect();
    let total: f64 = areas.iter().sum();
    let mut cdf = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a / total;
        cdf.push(acc);
    }
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let i = cdf.partition_point(|&c| c < u).min(mesh.len() - 1);
            let [a, b, c] = mesh.triangle(i);
            let (mut r1, mut r2): (f64, f64) = (rng.random(), rng.random());
            if r1 + r2 > 1.0 {
                r1 = 1.0 - r1;
                r2 = 1.0 - r2;
            }
            a + (b - a) * r1 + (c - a) * r2
        })
        .collect()
}

#[test]
fn ten_thousand_points_rotated_about_y() {
    let gt = object_cloud(10_000, 1);
    let r = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0);
    let pred: Vec<_> = gt.iter().map(|p| Point3::from(r * p.coords + Vector3::new(0.5, 0.0, -0.2))).collect();
    let start = Instant::now();
    let reg = canonical_register(&pred, &gt, &CanonicalOptions::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    eprintln!("canonical registration of 10K points: {elapsed:.2} s");
    assert!(reg.report.cd.unwrap() < 1e-6, "{:?}", reg.report);
    assert!(RigidTransform::from_rotation(reg.transform.rotation * r).angle() < 1e-6);
    assert!(elapsed < 30.0);
}

#[test]
fn generic_rotation_off_the_grid() {
    let gt = object_cloud(3000, 2);
    let r = lari_core::metrics::RigidTransform::from_rotation(
        nalgebra::Rotation3::from_euler_angles(0.7, -1.1, 2.3).into_inner(),
    );
    let pred: Vec<_> = gt.iter().map(|p| r.apply(p)).collect();
    let reg = canonical_register(&pred, &gt, &CanonicalOptions::default()).unwrap();
    assert!(reg.report.cd.unwrap() < 1e-6, "{:?}", reg.report);
}
