use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::cloud::{chamfer_with_trees, fscore_from_distances, sample_indices};
use super::{
    nearest_distances, normalize_by_diagonal, sample_points, scale_shift_align, AlignmentResult,
    KdTree, MetricsError, DEFAULT_THRESHOLDS,
};
use crate::render::{select_points_in_layers, IntersectionMask, LariMap};

/// Sample count for object-scale evaluation.
pub const OBJECT_SAMPLES: usize = 10_000;
/// Sample count for scene-scale evaluation.
pub const SCENE_SAMPLES: usize = 100_000;
const SCENE_POINT_COUNT: usize = 1_000_000;

/// Object-scale sample count unless either cloud has a million points or more.
pub fn default_sample_count(n_pred: usize, n_gt: usize) -> usize {
    if n_pred < SCENE_POINT_COUNT && n_gt < SCENE_POINT_COUNT {
        OBJECT_SAMPLES
    } else {
        SCENE_SAMPLES
    }
}

/// Layer subset a report covers: the first surface, the occluded ones, or all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Visible,
    Unseen,
    Overall,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Visible, Region::Unseen, Region::Overall];

    pub fn layer_range(self, layers: usize) -> Range<usize> {
        match self {
            Region::Visible => 0..layers.min(1),
            Region::Unseen => layers.min(1)..layers,
            Region::Overall => 0..layers,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Visible => "visible",
            Region::Unseen => "unseen",
            Region::Overall => "overall",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "visible" => Ok(Region::Visible),
            "unseen" => Ok(Region::Unseen),
            "overall" => Ok(Region::Overall),
            other => Err(format!("unknown region '{other}' (expected visible, unseen or overall)")),
        }
    }
}

/// What is being evaluated against a layered ground truth.
#[derive(Debug, Clone, Copy)]
pub enum Prediction<'a> {
    /// Free point cloud already in the camera frame. It has no per-pixel
    /// correspondences, so no alignment is applied and it counts toward
    /// every region.
    Cloud(&'a [Point3<f64>]),
    /// Layered prediction with its own intersection mask.
    Layered {
        map: &'a LariMap,
        mask: &'a IntersectionMask,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// `None` picks [`default_sample_count`].
    pub n_samples: Option<usize>,
    pub thresholds: Vec<f64>,
    pub seed: u64,
    /// Scale both clouds so the ground-truth bounding-box diagonal is 1.
    pub normalize: bool,
    /// Draw one fixed sample from all layers and split it by region instead
    /// of sampling each region separately.
    pub fixed_samples: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_samples: None,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            seed: 0,
            normalize: true,
            fixed_samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub region: Region,
    /// `None` when the prediction has no points in the region.
    pub cd: Option<f64>,
    /// `(threshold, F-score)` pairs in the requested order.
    pub fs: Vec<(f64, f64)>,
    pub n_pred: usize,
    pub n_gt: usize,
    pub alignment: Option<AlignmentResult>,
}

impl MetricsReport {
    pub fn fscore_at(&self, tau: f64) -> Option<f64> {
        self.fs.iter().find(|(t, _)| *t == tau).map(|(_, f)| *f)
    }
}

/// One line of a batch report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub image_id: String,
    pub report: MetricsReport,
}

impl MetricsRecord {
    /// Flat JSON object: `image_id, region, cd, fs@<tau>..., n_pred, n_gt,
    /// alignment {s, t}`.
    pub fn to_json(&self) -> Value {
        let r = &self.report;
        let mut m = Map::new();
        m.insert("image_id".into(), json!(self.image_id));
        m.insert("region".into(), json!(r.region.as_str()));
        m.insert("cd".into(), json!(r.cd));
        for (tau, f) in &r.fs {
            m.insert(format!("fs@{tau}"), json!(f));
        }
        m.insert("n_pred".into(), json!(r.n_pred));
        m.insert("n_gt".into(), json!(r.n_gt));
        m.insert(
            "alignment".into(),
            match r.alignment {
                Some(a) => json!({ "s": a.scale, "t": a.shift }),
                None => Value::Null,
            },
        );
        Value::Object(m)
    }

    pub fn to_json_line(&self) -> String {
        self.to_json().to_string()
    }
}

fn is_finite(p: &Point3<f64>) -> bool {
    p.iter().all(|v| v.is_finite())
}

/// Points within the region, each tagged with its layer; non-finite entries
/// are skipped.
fn region_points(
    map: &LariMap,
    mask: &IntersectionMask,
    layers: Range<usize>,
) -> Result<Vec<(Point3<f64>, usize)>, MetricsError> {
    Ok(select_points_in_layers(map, mask, layers)?
        .into_iter()
        .filter(|(p, _)| is_finite(p))
        .collect())
}

/// Scale-shift alignment over all pixels and layers valid in both masks.
fn align_layered(
    pred: &LariMap,
    pred_mask: &IntersectionMask,
    gt: &LariMap,
    gt_mask: &IntersectionMask,
) -> Result<AlignmentResult, MetricsError> {
    let dims = |m: &LariMap| (m.height(), m.width(), m.layers());
    if dims(pred) != dims(gt) {
        return Err(MetricsError::ShapeMismatch(format!(
            "prediction {:?} vs ground truth {:?}",
            dims(pred),
            dims(gt)
        )));
    }
    let (mut ps, mut gs) = (Vec::new(), Vec::new());
    for row in 0..gt.height() {
        for col in 0..gt.width() {
            for l in 0..gt.layers() {
                if gt_mask.get(row, col, l) && pred_mask.get(row, col, l) {
                    let (p, g) = (pred.get(row, col, l), gt.get(row, col, l));
                    if is_finite(&p) && is_finite(&g) {
                        ps.push(p);
                        gs.push(g);
                    }
                }
            }
        }
    }
    scale_shift_align(&ps, &gs)
}

/// Deterministic sample of `n` points from `pool` restricted to the layers in
/// `region`, either drawn from the region directly or, with `fixed`, drawn from
/// the whole pool and then split.
fn draw(
    pool: &[(Point3<f64>, usize)],
    region: Range<usize>,
    n: usize,
    seed: u64,
    fixed: bool,
) -> Result<Vec<Point3<f64>>, MetricsError> {
    if fixed {
        if pool.is_empty() {
            return Err(MetricsError::EmptyCloud);
        }
        Ok(sample_indices(pool.len(), n, seed)
            .into_iter()
            .map(|i| pool[i])
            .filter(|(_, l)| region.contains(l))
            .map(|(p, _)| p)
            .collect())
    } else {
        let inside: Vec<Point3<f64>> = pool
            .iter()
            .filter(|(_, l)| region.contains(l))
            .map(|(p, _)| *p)
            .collect();
        if inside.is_empty() {
            return Ok(inside);
        }
        sample_points(&inside, n, seed)
    }
}

/// View-aligned evaluation of one region.
///
/// A layered prediction is scale-shift aligned to the ground truth using all
/// commonly valid entries, then both clouds are optionally normalized by the
/// ground-truth diagonal, sampled with the same seed and compared with
/// Chamfer distance and F-scores. An empty predicted region yields `cd =
/// None` and zero F-scores.
pub fn evaluate_view_aligned(
    pred: Prediction<'_>,
    gt: &LariMap,
    gt_mask: &IntersectionMask,
    region: Region,
    opts: &EvalOptions,
) -> Result<MetricsReport, MetricsError> {
    for &tau in &opts.thresholds {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(MetricsError::InvalidThreshold(tau));
        }
    }
    let layers = gt.layers();
    let range = region.layer_range(layers);
    let gt_pool = region_points(gt, gt_mask, 0..layers)?;
    if !gt_pool.iter().any(|(_, l)| range.contains(l)) {
        return Err(MetricsError::EmptyRegion(region));
    }

    let (pred_pool, alignment) = match pred {
        Prediction::Layered { map, mask } => {
            let a = align_layered(map, mask, gt, gt_mask)?;
            let pool: Vec<_> = region_points(map, mask, 0..layers)?
                .into_iter()
                .map(|(p, l)| (a.apply(&p), l))
                .collect();
            (pool, Some(a))
        }
        Prediction::Cloud(points) => {
            let pool: Vec<_> = points
                .iter()
                .filter(|p| is_finite(p))
                .map(|p| (*p, range.start))
                .collect();
            (pool, None)
        }
    };

    let factor = if opts.normalize {
        normalize_by_diagonal(&gt_pool.iter().map(|(p, _)| *p).collect::<Vec<_>>())
    } else {
        1.0
    };
    let scale = |pool: Vec<(Point3<f64>, usize)>| -> Vec<(Point3<f64>, usize)> {
        pool.into_iter().map(|(p, l)| (p * factor, l)).collect()
    };
    let (gt_pool, pred_pool) = (scale(gt_pool), scale(pred_pool));

    let n = opts
        .n_samples
        .unwrap_or_else(|| default_sample_count(pred_pool.len(), gt_pool.len()));
    let gt_pts = draw(&gt_pool, range.clone(), n, opts.seed, opts.fixed_samples)?;
    let pred_range = match pred {
        Prediction::Cloud(_) => range.start..range.start + 1,
        Prediction::Layered { .. } => range.clone(),
    };
    let pred_pts = if pred_pool.is_empty() {
        Vec::new()
    } else {
        draw(&pred_pool, pred_range, n, opts.seed, opts.fixed_samples)?
    };
    if gt_pts.is_empty() {
        return Err(MetricsError::EmptyRegion(region));
    }
    if pred_pts.is_empty() {
        return Ok(MetricsReport {
            region,
            cd: None,
            fs: opts.thresholds.iter().map(|&t| (t, 0.0)).collect(),
            n_pred: 0,
            n_gt: gt_pts.len(),
            alignment,
        });
    }
    Ok(compare(region, &pred_pts, &gt_pts, &opts.thresholds, alignment))
}

/// Chamfer distance and F-scores of two non-empty clouds.
pub(crate) fn compare(
    region: Region,
    pred: &[Point3<f64>],
    gt: &[Point3<f64>],
    thresholds: &[f64],
    alignment: Option<AlignmentResult>,
) -> MetricsReport {
    let (tp, tg) = (KdTree::build(pred), KdTree::build(gt));
    let to_gt = nearest_distances(pred, &tg);
    let to_pred = nearest_distances(gt, &tp);
    MetricsReport {
        region,
        cd: Some(chamfer_with_trees(pred, &tp, gt, &tg)),
        fs: thresholds
            .iter()
            .map(|&t| (t, fscore_from_distances(&to_gt, &to_pred, t)))
            .collect(),
        n_pred: pred.len(),
        n_gt: gt.len(),
        alignment,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Bvh;
    use crate::render::{mask_from_index, render_lari, Intrinsics, PinholeCamera, RenderOptions};
    use crate::shapes::cube;
    use nalgebra::Matrix3;

    fn cube_render() -> (LariMap, IntersectionMask) {
        let mesh = cube(Point3::new(0.0, 0.0, 2.0), 1.0);
        let bvh = Bvh::build(&mesh).unwrap();
        let k = Intrinsics {
            fx: 64.0,
            fy: 64.0,
            cx: 32.0,
            cy: 32.0,
            width: 64,
            height: 64,
        };
        let cam = PinholeCamera::new(k, Matrix3::identity(), Point3::origin()).unwrap();
        let out = render_lari(&mesh, &bvh, &cam, &RenderOptions::with_layers(5)).unwrap();
        let mask = mask_from_index(&out.index, 5).unwrap();
        (out.map, mask)
    }

    fn opts() -> EvalOptions {
        EvalOptions {
            n_samples: Some(2000),
            ..EvalOptions::default()
        }
    }

    #[test]
    fn self_evaluation_is_perfect_in_every_region() {
        let (map, mask) = cube_render();
        for region in Region::ALL {
            let pred = Prediction::Layered { map: &map, mask: &mask };
            let r = evaluate_view_aligned(pred, &map, &mask, region, &opts()).unwrap();
            assert_eq!(r.cd, Some(0.0), "{region}");
            for (_, f) in &r.fs {
                assert_eq!(*f, 1.0);
            }
            assert_eq!(r.n_pred, 2000);
            assert_eq!(r.alignment.map(|a| (a.scale, a.shift)), Some((1.0, 0.0)));
        }
    }

    #[test]
    fn doubled_prediction_matches_self_evaluation() {
        let (map, mask) = cube_render();
        let doubled = map.scaled(2.0);
        for region in Region::ALL {
            let pred = Prediction::Layered { map: &doubled, mask: &mask };
            let r = evaluate_view_aligned(pred, &map, &mask, region, &opts()).unwrap();
            assert!(r.cd.unwrap() < 1e-12);
            assert!(r.fs.iter().all(|(_, f)| *f == 1.0));
            assert!((r.alignment.unwrap().scale - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_back_layer_fails_only_the_unseen_region() {
        let (map, mask) = cube_render();
        let front = mask_from_index(
            &crate::render::StoppingIndexMap::from_raw(
                64,
                64,
                mask.to_index().as_slice().iter().map(|&c| c.min(1)).collect(),
            )
            .unwrap(),
            5,
        )
        .unwrap();
        let pred = Prediction::Layered { map: &map, mask: &front };
        let visible = evaluate_view_aligned(pred, &map, &mask, Region::Visible, &opts()).unwrap();
        assert_eq!(visible.cd, Some(0.0));
        let unseen = evaluate_view_aligned(pred, &map, &mask, Region::Unseen, &opts()).unwrap();
        assert_eq!(unseen.cd, None);
        assert!(unseen.fs.iter().all(|(_, f)| *f == 0.0));
        assert_eq!(unseen.n_pred, 0);
    }

    #[test]
    fn empty_ground_truth_region_is_an_error() {
        let (map, mask) = cube_render();
        let none = mask_from_index(&crate::render::StoppingIndexMap::new(64, 64), 5).unwrap();
        let pred = Prediction::Layered { map: &map, mask: &mask };
        assert_eq!(
            evaluate_view_aligned(pred, &map, &none, Region::Visible, &opts()),
            Err(MetricsError::EmptyRegion(Region::Visible))
        );
    }

    #[test]
    fn fixed_samples_partition_the_overall_draw() {
        let (map, mask) = cube_render();
        let o = EvalOptions {
            fixed_samples: true,
            ..opts()
        };
        let pred = Prediction::Layered { map: &map, mask: &mask };
        let v = evaluate_view_aligned(pred, &map, &mask, Region::Visible, &o).unwrap();
        let u = evaluate_view_aligned(pred, &map, &mask, Region::Unseen, &o).unwrap();
        assert_eq!(v.n_gt + u.n_gt, 2000);
        assert_eq!((v.cd, u.cd), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn record_layout() {
        let report = MetricsReport {
            region: Region::Unseen,
            cd: Some(0.25),
            fs: DEFAULT_THRESHOLDS.iter().map(|&t| (t, 0.5)).collect(),
            n_pred: 10,
            n_gt: 12,
            alignment: Some(AlignmentResult {
                scale: 2.0,
                shift: -1.0,
                residual_rms: 0.0,
            }),
        };
        let line = MetricsRecord {
            image_id: "obj_01".into(),
            report,
        }
        .to_json_line();
        assert_eq!(
            line,
            r#"{"image_id":"obj_01","region":"unseen","cd":0.25,"fs@0.1":0.5,"fs@0.05":0.5,"fs@0.02":0.5,"n_pred":10,"n_gt":12,"alignment":{"s":2.0,"t":-1.0}}"#
        );
    }

    #[test]
    fn sample_count_defaults() {
        assert_eq!(default_sample_count(5000, 999_999), OBJECT_SAMPLES);
        assert_eq!(default_sample_count(1_000_000, 10), SCENE_SAMPLES);
        assert_eq!("unseen".parse::<Region>(), Ok(Region::Unseen));
    }
}
