//! Mesh loading, the `.lari` container, point-cloud export and camera pose
//! conventions.

mod lari;
mod obj;
mod ply;
mod pose;

pub use lari::{
    decode_lari, encode_lari, lari_file_size, read_lari, write_lari, FLAG_MASK, HEADER_LEN,
    LARI_MAGIC, LARI_VERSION,
};
pub use obj::parse_obj;
pub use ply::{encode_ply, export_ply, parse_ply, write_ply, PlyData, PlyEncoding, LAYER_PALETTE};
pub use pose::{convert_pose, AxisConvention, MatrixSide, PoseConvention, PoseDirection};

use std::fmt;
use std::path::Path;

use nalgebra::Point3;
use thiserror::Error;

use crate::geometry::{GeometryError, TriangleMesh};
use crate::render::RenderError;

/// Position of a parse error: a 1-based line for text, a byte offset for
/// binary data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Byte(u64),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Byte(n) => write!(f, "byte {n}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{format} parse error at {location}: {message}")]
    Parse {
        format: MeshFormat,
        location: Location,
        message: String,
    },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("file truncated: expected {expected} bytes, found {actual}")]
    TruncatedFile { expected: u64, actual: u64 },
    #[error("corrupt body: {0}")]
    CorruptBody(String),
    #[error("layer count {0} does not fit 8-bit stopping indices")]
    TooManyLayers(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("pose is not a rigid transform (orthonormal rotation, det +1, last row 0 0 0 1)")]
    InvalidRotation,
    #[error(transparent)]
    Mesh(#[from] GeometryError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> IoError {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl fmt::Display for MeshFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeshFormat::Obj => "OBJ",
            MeshFormat::Ply => "PLY",
        })
    }
}

impl MeshFormat {
    /// Format from the (case-insensitive) file extension.
    pub fn from_path(path: &Path) -> Result<MeshFormat, IoError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            _ => Err(IoError::UnsupportedFormat(path.display().to_string())),
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|e| IoError::io(path, e))
}

/// Parses mesh bytes. Polygons are fan-triangulated and degenerate triangles
/// dropped (see [`TriangleMesh::dropped_degenerate`]); a file without faces
/// is an [`GeometryError::EmptyMesh`] error.
pub fn parse_mesh(bytes: &[u8], format: MeshFormat) -> Result<TriangleMesh, IoError> {
    let (vertices, triangles) = match format {
        MeshFormat::Obj => parse_obj(bytes)?,
        MeshFormat::Ply => {
            let ply = parse_ply(bytes)?;
            (ply.vertices, ply.triangles)
        }
    };
    if triangles.is_empty() {
        return Err(GeometryError::EmptyMesh.into());
    }
    Ok(TriangleMesh::new(vertices, triangles)?)
}

/// Loads a triangle mesh; `format` defaults to the file extension.
pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriangleMesh, IoError> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    parse_mesh(&read_file(path)?, format)
}

/// Loads the vertex positions of an OBJ or PLY file, faces optional.
pub fn load_points(path: &Path) -> Result<Vec<Point3<f64>>, IoError> {
    let bytes = read_file(path)?;
    Ok(match MeshFormat::from_path(path)? {
        MeshFormat::Obj => parse_obj(&bytes)?.0,
        MeshFormat::Ply => parse_ply(&bytes)?.vertices,
    })
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}
