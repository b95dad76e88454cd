//! Dataset curation: camera rings around objects, per-object layer
//! occupancy statistics and the internal-structure / small-object filters.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Bvh, GeometryError, TriangleMesh};
use crate::render::{render_lari, Intrinsics, PinholeCamera, RenderError, RenderOptions};

/// Camera distance in bounding-sphere radii.
pub const DEFAULT_RADIUS: f64 = 2.5;
/// Vertical field of view in degrees.
pub const DEFAULT_FOV_DEG: f64 = 50.0;
/// Image size for occupancy statistics.
pub const STATS_RESOLUTION: u32 = 128;
/// Layer count for occupancy statistics.
pub const STATS_LAYERS: usize = 5;
/// Elevations of the default evaluation view ring, in degrees.
pub const DEFAULT_ELEVATIONS: [f64; 3] = [0.0, 30.0, 60.0];
pub const DEFAULT_AZIMUTHS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurationError {
    #[error("no views given")]
    NoViews,
    #[error("invalid view: {0}")]
    InvalidView(String),
    #[error("occupancy statistics need at least 2 layers, got {0}")]
    TooFewLayers(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Point a view camera aims at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LookAt {
    /// Center of the object's bounding box.
    BoundsCenter,
    Point([f64; 3]),
}

/// Orbit camera around an object. Azimuth 0 at elevation 0 looks along +z;
/// positive elevation raises the camera toward +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    /// Distance from the look-at point in bounding-sphere radii.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_look_at")]
    pub look_at: LookAt,
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS
}

fn default_look_at() -> LookAt {
    LookAt::BoundsCenter
}

fn default_fov() -> f64 {
    DEFAULT_FOV_DEG
}

impl ViewSpec {
    pub fn new(elevation_deg: f64, azimuth_deg: f64) -> ViewSpec {
        ViewSpec {
            elevation_deg,
            azimuth_deg,
            radius: DEFAULT_RADIUS,
            look_at: LookAt::BoundsCenter,
            fov_deg: DEFAULT_FOV_DEG,
        }
    }

    pub fn validate(&self) -> Result<(), CurationError> {
        if !(self.radius > 1.0 && self.radius.is_finite()) {
            return Err(CurationError::InvalidView(format!(
                "radius must exceed 1, got {}",
                self.radius
            )));
        }
        if !(-90.0..=90.0).contains(&self.elevation_deg) {
            return Err(CurationError::InvalidView(format!(
                "elevation {} outside [-90, 90]",
                self.elevation_deg
            )));
        }
        if !self.azimuth_deg.is_finite() || !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(CurationError::InvalidView(format!(
                "azimuth {} / fov {} out of range",
                self.azimuth_deg, self.fov_deg
            )));
        }
        Ok(())
    }

    /// Unit vector from the look-at point toward the camera.
    pub fn direction(&self) -> Vector3<f64> {
        let (el, az) = (self.elevation_deg.to_radians(), self.azimuth_deg.to_radians());
        Vector3::new(-el.cos() * az.sin(), el.sin(), -el.cos() * az.cos())
    }

    /// Square camera for an object with the given bounds. World up is +y;
    /// straight-down and straight-up views take their roll from the azimuth.
    pub fn camera(&self, bounds: &Aabb, resolution: u32) -> Result<PinholeCamera, CurationError> {
        self.validate()?;
        if bounds.is_empty() {
            return Err(CurationError::Geometry(GeometryError::EmptyMesh));
        }
        let target = match self.look_at {
            LookAt::BoundsCenter => bounds.center(),
            LookAt::Point(p) => Point3::from(p),
        };
        let sphere = (0.5 * bounds.diagonal()).max(f64::MIN_POSITIVE);
        let dir = self.direction();
        let eye = target + dir * (self.radius * sphere);
        let up = if dir.y.abs() > 1.0 - 1e-9 {
            let az = self.azimuth_deg.to_radians();
            Vector3::new(az.sin(), 0.0, az.cos())
        } else {
            Vector3::y()
        };
        let k = Intrinsics::from_fov(resolution, resolution, self.fov_deg);
        Ok(PinholeCamera::look_at(k, eye, target, up)?)
    }
}

/// `|elevations| * n_azimuth` views, elevation-major, with azimuths evenly
/// spaced from 0. A seed adds one common random azimuth offset in
/// `[0, step)`; the same seed always yields the same list.
pub fn sample_views(
    elevations: &[f64],
    n_azimuth: usize,
    radius: f64,
    seed: Option<u64>,
) -> Vec<ViewSpec> {
    if n_azimuth == 0 {
        return Vec::new();
    }
    let step = 360.0 / n_azimuth as f64;
    let offset = seed.map_or(0.0, |s| ChaCha8Rng::seed_from_u64(s).random_range(0.0..step));
    elevations
        .iter()
        .flat_map(|&el| {
            (0..n_azimuth).map(move |i| ViewSpec {
                radius,
                ..ViewSpec::new(el, offset + step * i as f64)
            })
        })
        .collect()
}

/// Exceedance fractions per view: entry `k` is the fraction of image pixels
/// whose ray meets the surface at least `k + 1` times, for `k = 0..=L`.
/// Entry 0 is foreground coverage and entry `L` the overflow fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerOccupancyStats {
    pub layers: usize,
    pub per_view: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
}

impl LayerOccupancyStats {
    fn from_views(layers: usize, per_view: Vec<Vec<f64>>) -> Self {
        let n = per_view.len() as f64;
        let mut mean = vec![0.0; layers + 1];
        let mut max = vec![0.0f64; layers + 1];
        for v in &per_view {
            for (k, &f) in v.iter().enumerate() {
                mean[k] += f / n;
                max[k] = max[k].max(f);
            }
        }
        LayerOccupancyStats {
            layers,
            per_view,
            mean,
            max,
        }
    }

    pub fn aggregate(&self, how: Aggregate) -> &[f64] {
        match how {
            Aggregate::Mean => &self.mean,
            Aggregate::Max => &self.max,
        }
    }

    /// Fraction of pixels with more than two surface intersections.
    pub fn deep_fraction(&self, how: Aggregate) -> f64 {
        self.aggregate(how).get(2).copied().unwrap_or(0.0)
    }

    pub fn coverage(&self, how: Aggregate) -> f64 {
        self.aggregate(how)[0]
    }
}

/// Occupancy statistics of `mesh` over `views`.
pub fn layer_occupancy(
    mesh: &TriangleMesh,
    views: &[ViewSpec],
    layers: usize,
    resolution: u32,
) -> Result<LayerOccupancyStats, CurationError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh.into());
    }
    let bounds = mesh.bounds();
    let cameras = views
        .iter()
        .map(|v| v.camera(&bounds, resolution))
        .collect::<Result<Vec<_>, _>>()?;
    layer_occupancy_for_cameras(mesh, &cameras, layers)
}

/// Occupancy statistics of `mesh` seen from explicit cameras.
pub fn layer_occupancy_for_cameras(
    mesh: &TriangleMesh,
    cameras: &[PinholeCamera],
    layers: usize,
) -> Result<LayerOccupancyStats, CurationError> {
    if cameras.is_empty() {
        return Err(CurationError::NoViews);
    }
    if layers < 2 {
        return Err(CurationError::TooFewLayers(layers));
    }
    let bvh = Bvh::build(mesh)?;
    let opts = RenderOptions::with_layers(layers);
    let mut per_view = Vec::with_capacity(cameras.len());
    for cam in cameras {
        let out = render_lari(mesh, &bvh, cam, &opts)?;
        let pixels = out.hit_counts.len() as f64;
        let fractions = (0..=layers)
            .map(|k| out.hit_counts.iter().filter(|&&c| c as usize > k).count() as f64 / pixels)
            .collect();
        per_view.push(fractions);
    }
    Ok(LayerOccupancyStats::from_views(layers, per_view))
}

/// Cross-view aggregate a filter compares against its thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterThresholds {
    /// Largest tolerated fraction of pixels with more than two intersections.
    pub max_deep_fraction: f64,
    /// Smallest tolerated foreground coverage.
    pub min_coverage: f64,
    pub aggregate: Aggregate,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        FilterThresholds {
            max_deep_fraction: 0.15,
            min_coverage: 0.05,
            aggregate: Aggregate::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectKind {
    InternalStructure,
    TooSmall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectReason {
    pub kind: RejectKind,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub accepted: bool,
    pub reasons: Vec<RejectReason>,
}

/// Rejects objects with too much internal structure or too little coverage.
pub fn filter_object(stats: &LayerOccupancyStats, thresholds: &FilterThresholds) -> FilterVerdict {
    let mut reasons = Vec::new();
    let deep = stats.deep_fraction(thresholds.aggregate);
    if deep > thresholds.max_deep_fraction {
        reasons.push(RejectReason {
            kind: RejectKind::InternalStructure,
            value: deep,
            threshold: thresholds.max_deep_fraction,
        });
    }
    let coverage = stats.coverage(thresholds.aggregate);
    if coverage < thresholds.min_coverage {
        reasons.push(RejectReason {
            kind: RejectKind::TooSmall,
            value: coverage,
            threshold: thresholds.min_coverage,
        });
    }
    FilterVerdict {
        accepted: reasons.is_empty(),
        reasons,
    }
}
