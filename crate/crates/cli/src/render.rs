use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lari_core::curation::{sample_views, ViewSpec, DEFAULT_FOV_DEG};
use lari_core::geometry::{Aabb, Bvh};
use lari_core::io::{
    export_ply, load_mesh, read_lari, write_atomic, write_lari, AxisConvention, MatrixSide,
    PlyEncoding, PoseConvention, PoseDirection,
};
use lari_core::render::{
    mask_from_index, render_lari, select_points_in_layers, Intrinsics, PinholeCamera, RenderOptions,
};
use nalgebra::{Matrix4, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{AxesArg, CliError, DirectionArg, ExportArgs, RenderArgs, SideArg, ViewsArgs};

/// One line of a camera manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraEntry {
    pub id: String,
    /// Explicit intrinsics; otherwise derived from the field of view and `--size`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<Intrinsics>,
    #[serde(flatten)]
    pub source: CameraSource,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CameraSource {
    Pose {
        /// Row-major 4x4.
        pose: [[f64; 4]; 4],
        #[serde(default = "canonical")]
        convention: PoseConvention,
        #[serde(default = "default_fov")]
        fov_deg: f64,
    },
    LookAt {
        eye: [f64; 3],
        target: [f64; 3],
        #[serde(default = "default_up")]
        up: [f64; 3],
        #[serde(default = "default_fov")]
        fov_deg: f64,
    },
    View(ViewSpec),
}

fn canonical() -> PoseConvention {
    PoseConvention::CANONICAL
}

fn default_fov() -> f64 {
    DEFAULT_FOV_DEG
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

impl CameraSource {
    fn fov(&self) -> f64 {
        match self {
            CameraSource::Pose { fov_deg, .. } | CameraSource::LookAt { fov_deg, .. } => *fov_deg,
            CameraSource::View(v) => v.fov_deg,
        }
    }

    fn camera(&self, intrinsics: Intrinsics, bounds: &Aabb) -> Result<PinholeCamera> {
        Ok(match self {
            CameraSource::Pose { pose, convention, .. } => {
                let m = Matrix4::from_fn(|r, c| pose[r][c]);
                convention.camera(&m, intrinsics)?
            }
            CameraSource::LookAt { eye, target, up, .. } => PinholeCamera::look_at(
                intrinsics,
                Point3::from(*eye),
                Point3::from(*target),
                Vector3::from(*up),
            )?,
            CameraSource::View(v) => {
                let cam = v.camera(bounds, intrinsics.height)?;
                cam.with_intrinsics(intrinsics)?
            }
        })
    }
}

fn read_manifest(path: &Path) -> Result<Vec<CameraEntry>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let entry: CameraEntry = serde_json::from_str(line)
            .with_context(|| format!("{} line {}: not a camera entry", path.display(), i + 1))?;
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(CliError::InvalidArgument(format!("{} lists no cameras", path.display())).into());
    }
    check_ids(entries.iter().map(|e| e.id.as_str()))?;
    Ok(entries)
}

/// Ids become file names: non-empty, unique, no path separators.
pub(crate) fn check_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
            return Err(CliError::InvalidArgument(format!("invalid id '{id}'")).into());
        }
        if !seen.insert(id) {
            return Err(CliError::InvalidArgument(format!("duplicate id '{id}'")).into());
        }
    }
    Ok(())
}

fn single_camera(a: &RenderArgs) -> CameraSource {
    if let Some(p) = a.pose {
        let convention = PoseConvention {
            axes: match a.pose_axes {
                AxesArg::Opencv => AxisConvention::OpenCv,
                AxesArg::Opengl => AxisConvention::OpenGl,
            },
            side: match a.pose_side {
                SideArg::Column => MatrixSide::Column,
                SideArg::Row => MatrixSide::Row,
            },
            direction: match a.pose_direction {
                DirectionArg::C2w => PoseDirection::CameraToWorld,
                DirectionArg::W2c => PoseDirection::WorldToCamera,
            },
        };
        return CameraSource::Pose {
            pose: std::array::from_fn(|r| std::array::from_fn(|c| p[4 * r + c])),
            convention,
            fov_deg: a.fov,
        };
    }
    if let Some(eye) = a.eye {
        let target = a.target.unwrap_or([eye[0], eye[1], eye[2] + 1.0]);
        return CameraSource::LookAt {
            eye,
            target,
            up: a.up,
            fov_deg: a.fov,
        };
    }
    CameraSource::View(ViewSpec {
        radius: a.radius,
        fov_deg: a.fov,
        ..ViewSpec::new(a.elevation.unwrap_or(0.0), a.azimuth.unwrap_or(0.0))
    })
}

fn intrinsics_for(entry: &CameraEntry, size: u32, focal: Option<f64>) -> Intrinsics {
    if let Some(k) = entry.intrinsics {
        return k;
    }
    let mut k = Intrinsics::from_fov(size, size, entry.source.fov());
    if let Some(f) = focal {
        k.fx = f;
        k.fy = f;
    }
    k
}

pub fn cmd_render(a: &RenderArgs) -> Result<()> {
    if !(a.fov > 0.0 && a.fov < 180.0) {
        return Err(CliError::InvalidArgument(format!("--fov {} outside (0, 180)", a.fov)).into());
    }
    if matches!(a.focal, Some(f) if !(f > 0.0 && f.is_finite())) {
        return Err(CliError::InvalidArgument("--focal must be positive".into()).into());
    }
    let (entries, targets): (Vec<CameraEntry>, Vec<PathBuf>) = match &a.cameras {
        Some(manifest) => {
            let entries = read_manifest(manifest)?;
            let targets = entries.iter().map(|e| a.out.join(format!("{}.lari", e.id))).collect();
            (entries, targets)
        }
        None => {
            let id = a
                .out
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "view".into());
            let entry = CameraEntry {
                id,
                intrinsics: None,
                source: single_camera(a),
            };
            (vec![entry], vec![a.out.clone()])
        }
    };

    let mesh = load_mesh(&a.mesh, None).with_context(|| format!("loading {}", a.mesh.display()))?;
    let bounds = mesh.bounds();
    let cameras = entries
        .iter()
        .map(|e| {
            e.source
                .camera(intrinsics_for(e, a.size, a.focal), &bounds)
                .with_context(|| format!("camera '{}'", e.id))
        })
        .collect::<Result<Vec<_>>>()?;
    if a.cameras.is_some() {
        std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    }
    if mesh.dropped_degenerate() > 0 {
        eprintln!("warning: dropped {} degenerate triangles", mesh.dropped_degenerate());
    }

    let bvh = Bvh::build(&mesh)?;
    let options = RenderOptions::with_layers(a.layers);
    let (mut pixels, mut overflow) = (0usize, 0usize);
    for ((entry, camera), target) in entries.iter().zip(&cameras).zip(&targets) {
        let out = render_lari(&mesh, &bvh, camera, &options)?;
        let bytes = write_lari(target, &out.map, &out.index)?;
        let s = out.stats;
        pixels += s.pixels;
        overflow += s.overflow_pixels;
        println!(
            "{}: {} of {} pixels hit, max {} hits, overflow fraction {:.6}, {} bytes -> {}",
            entry.id,
            s.hit_pixels,
            s.pixels,
            s.max_hits,
            s.overflow_fraction(),
            bytes,
            target.display()
        );
        if s.duplicate_faces_suspected() {
            eprintln!(
                "warning: {}: {:.1}% of hit rays met coincident faces; the mesh may contain duplicate faces",
                entry.id,
                100.0 * s.coincident_fraction()
            );
        }
    }
    let frac = if pixels == 0 { 0.0 } else { overflow as f64 / pixels as f64 };
    println!("rendered {} view(s), {} layers, overflow fraction {:.6}", entries.len(), a.layers, frac);
    Ok(())
}

pub fn cmd_views(a: &ViewsArgs) -> Result<()> {
    let views = sample_views(&a.elevations, a.azimuths, a.radius, a.seed);
    let mut text = String::new();
    for (i, mut v) in views.into_iter().enumerate() {
        v.fov_deg = a.fov;
        v.validate()?;
        let entry = CameraEntry {
            id: format!("view_{i:03}"),
            intrinsics: None,
            source: CameraSource::View(v),
        };
        text.push_str(&serde_json::to_string(&entry)?);
        text.push('\n');
    }
    write_atomic(&a.out, text.as_bytes())?;
    println!("wrote {} views to {}", a.elevations.len() * a.azimuths, a.out.display());
    Ok(())
}

pub fn cmd_export(a: &ExportArgs) -> Result<()> {
    let (map, index) = read_lari(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let mask = mask_from_index(&index, map.layers())?;
    let selected = select_points_in_layers(&map, &mask, a.region.layer_range(map.layers()))?;
    if selected.is_empty() {
        bail!("{} has no valid points in the {} region", a.input.display(), a.region);
    }
    let (points, layers): (Vec<_>, Vec<_>) = selected.into_iter().unzip();
    let encoding = if a.ascii {
        PlyEncoding::Ascii
    } else {
        PlyEncoding::BinaryLittleEndian
    };
    export_ply(&points, Some(&layers), &a.out, encoding)?;
    println!("exported {} points to {}", points.len(), a.out.display());
    Ok(())
}
