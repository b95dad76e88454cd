use nalgebra::Point3;
use rayon::prelude::*;

use super::{LariMap, PinholeCamera, RenderError, StoppingIndexMap, MAX_LAYERS};
use crate::geometry::{ray_all_hits_checked, Bvh, Ray, TriangleMesh};

pub const DEFAULT_LAYERS: usize = 5;
pub const DEFAULT_RESOLUTION: u32 = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub layers: usize,
    /// Image rows per parallel work item.
    pub rows_per_tile: usize,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            layers: DEFAULT_LAYERS,
            rows_per_tile: 8,
            workers: None,
        }
    }
}

impl RenderOptions {
    pub fn with_layers(layers: usize) -> Self {
        RenderOptions {
            layers,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RenderStats {
    pub pixels: usize,
    /// Pixels with at least one intersection.
    pub hit_pixels: usize,
    /// Pixels with more intersections than layers (truncated).
    pub overflow_pixels: usize,
    /// Pixels whose ray met coincident faces (merged hits that both lay
    /// inside their triangles rather than on a shared edge).
    pub coincident_pixels: usize,
    pub max_hits: usize,
}

impl RenderStats {
    pub fn overflow_fraction(&self) -> f64 {
        ratio(self.overflow_pixels, self.pixels)
    }

    pub fn coincident_fraction(&self) -> f64 {
        ratio(self.coincident_pixels, self.hit_pixels)
    }

    /// More than 1% of hitting rays met coincident faces, which usually
    /// means the asset contains duplicated faces.
    pub fn duplicate_faces_suspected(&self) -> bool {
        self.coincident_fraction() > 0.01
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LariRender {
    pub map: LariMap,
    pub index: StoppingIndexMap,
    /// Deduplicated hit count per pixel before truncation to the layer count.
    pub hit_counts: Vec<u32>,
    pub stats: RenderStats,
}

/// Renders the LaRI map and stopping index of `mesh` seen from `camera`.
///
/// One ray per pixel center. The first `min(hits, L)` distinct hits are stored
/// as camera-space points; extra hits are dropped and counted as overflow.
/// Output is identical for any tile size or worker count.
pub fn render_lari(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    camera: &PinholeCamera,
    options: &RenderOptions,
) -> Result<LariRender, RenderError> {
    let layers = options.layers;
    if layers == 0 || layers > MAX_LAYERS {
        return Err(RenderError::InvalidLayerCount(layers));
    }
    let (width, height) = (camera.width(), camera.height());
    let band = options.rows_per_tile.max(1);
    let mut points = vec![f64::NAN; height * width * layers * 3];
    let mut index = vec![0u8; height * width];
    let mut counts = vec![0u32; height * width];
    let mut coincident = vec![false; height * width];

    let mut work = || {
        points
            .par_chunks_mut(band * width * layers * 3)
            .zip(index.par_chunks_mut(band * width))
            .zip(counts.par_chunks_mut(band * width))
            .zip(coincident.par_chunks_mut(band * width))
            .enumerate()
            .for_each(|(tile, (((pts, idx), cnt), col))| {
                let row0 = tile * band;
                for (i, c) in idx.iter_mut().enumerate() {
                    let (row, column) = (row0 + i / width, i % width);
                    let dir = camera.camera_direction(column as f64 + 0.5, row as f64 + 0.5);
                    let ray = Ray::new(*camera.position(), camera.rotation() * dir)
                        .expect("unit camera direction");
                    let (hits, overlap) = ray_all_hits_checked(bvh, mesh, &ray);
                    let kept = hits.len().min(layers);
                    for (l, hit) in hits.iter().take(kept).enumerate() {
                        let p: Point3<f64> = Point3::from(dir * hit.t);
                        let o = (i * layers + l) * 3;
                        pts[o..o + 3].copy_from_slice(p.coords.as_slice());
                    }
                    *c = kept as u8;
                    cnt[i] = hits.len() as u32;
                    col[i] = overlap;
                }
            })
    };
    match options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| RenderError::WorkerPool(e.to_string()))?
            .install(work),
        None => work(),
    }

    let stats = RenderStats {
        pixels: width * height,
        hit_pixels: counts.iter().filter(|&&c| c > 0).count(),
        overflow_pixels: counts.iter().filter(|&&c| c as usize > layers).count(),
        coincident_pixels: coincident.iter().filter(|&&c| c).count(),
        max_hits: counts.iter().copied().max().unwrap_or(0) as usize,
    };
    Ok(LariRender {
        map: LariMap::from_raw(height, width, layers, points)?,
        index: StoppingIndexMap::from_raw(height, width, index)?,
        hit_counts: counts,
        stats,
    })
}
