//! The `lari` command-line tool: renders layered ray-intersection ground
//! truth, curates object corpora and evaluates predictions.
//!
//! Every subcommand validates its arguments before doing any work. Batch
//! commands write JSON-lines records that are appended as work items finish
//! and rewritten sorted by id at the end, so an interrupted run can be
//! resumed by pointing it at the same output file.

mod eval;
mod filter;
mod journal;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use lari_core::curation::{Aggregate, CurationError};
use lari_core::io::IoError;
use lari_core::metrics::{MetricsError, Region};
use lari_core::render::RenderError;
use serde_json::json;
use thiserror::Error;

pub use eval::{EvalMode, EvalSummary};
pub use filter::FilterSummary;

#[derive(Debug, Parser)]
#[command(name = "lari", version, about = "Layered ray-intersection ground truth and evaluation")]
pub struct Cli {
    /// Worker threads for parallel work.
    #[arg(long, global = true, env = "LARI_WORKERS", value_parser = positive)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render LaRI maps of a mesh for one camera or a camera manifest.
    Render(Box<RenderArgs>),
    /// Write a camera manifest of orbit views.
    Views(ViewsArgs),
    /// Compute layer statistics for a mesh corpus and accept or reject each object.
    Filter(FilterArgs),
    /// Evaluate predicted point clouds or LaRI files against ground truth.
    Eval(EvalArgs),
    /// Compare two intersection masks (mIoU and DICE).
    MaskEval(MaskEvalArgs),
    /// Export the valid points of a LaRI file as a layer-colored PLY.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Mesh to render (.obj or .ply).
    #[arg(long)]
    pub mesh: PathBuf,
    /// JSON-lines camera manifest; `--out` is then a directory.
    #[arg(long, conflicts_with_all = ["eye", "pose", "elevation", "azimuth"])]
    pub cameras: Option<PathBuf>,
    /// Camera position `x,y,z`.
    #[arg(long, value_parser = vec3, conflicts_with_all = ["pose", "elevation", "azimuth"])]
    pub eye: Option<[f64; 3]>,
    /// Point the `--eye` camera looks at (default: one unit along +z).
    #[arg(long, value_parser = vec3, requires = "eye")]
    pub target: Option<[f64; 3]>,
    /// World up direction for `--eye`.
    #[arg(long, value_parser = vec3, default_value = "0,1,0")]
    pub up: [f64; 3],
    /// Row-major 4x4 pose matrix, 16 comma-separated values.
    #[arg(long, value_parser = mat4, allow_hyphen_values = true, conflicts_with_all = ["elevation", "azimuth"])]
    pub pose: Option<[f64; 16]>,
    #[arg(long, value_enum, default_value_t = AxesArg::Opencv)]
    pub pose_axes: AxesArg,
    #[arg(long, value_enum, default_value_t = SideArg::Column)]
    pub pose_side: SideArg,
    #[arg(long, value_enum, default_value_t = DirectionArg::C2w)]
    pub pose_direction: DirectionArg,
    /// Orbit-camera elevation in degrees (with `--azimuth`).
    #[arg(long, allow_hyphen_values = true)]
    pub elevation: Option<f64>,
    /// Orbit-camera azimuth in degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub azimuth: Option<f64>,
    /// Orbit distance in bounding-sphere radii.
    #[arg(long, default_value_t = lari_core::curation::DEFAULT_RADIUS)]
    pub radius: f64,
    /// Vertical field of view in degrees.
    #[arg(long, default_value_t = lari_core::curation::DEFAULT_FOV_DEG)]
    pub fov: f64,
    /// Focal length in pixels (overrides `--fov`).
    #[arg(long)]
    pub focal: Option<f64>,
    #[arg(long, default_value_t = lari_core::render::DEFAULT_LAYERS, value_parser = positive)]
    pub layers: usize,
    /// Square image size in pixels.
    #[arg(long, default_value_t = lari_core::render::DEFAULT_RESOLUTION, value_parser = positive_u32)]
    pub size: u32,
    /// Output `.lari` file, or directory with `--cameras`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxesArg {
    Opencv,
    Opengl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Column,
    Row,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    C2w,
    W2c,
}

#[derive(Debug, Args)]
pub struct ViewsArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = lari_core::curation::DEFAULT_ELEVATIONS)]
    pub elevations: Vec<f64>,
    /// Views per elevation, evenly spaced in azimuth.
    #[arg(long, default_value_t = lari_core::curation::DEFAULT_AZIMUTHS, value_parser = positive)]
    pub azimuths: usize,
    #[arg(long, default_value_t = lari_core::curation::DEFAULT_RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = lari_core::curation::DEFAULT_FOV_DEG)]
    pub fov: f64,
    /// Random common azimuth offset.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Directory of .obj/.ply meshes, or a manifest with one mesh per line.
    #[arg(long)]
    pub meshes: PathBuf,
    /// Verdict manifest (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.15)]
    pub max_deep_fraction: f64,
    #[arg(long, default_value_t = 0.05)]
    pub min_coverage: f64,
    #[arg(long, value_enum, default_value_t = AggregateArg::Mean)]
    pub aggregate: AggregateArg,
    #[arg(long, default_value_t = lari_core::curation::STATS_LAYERS, value_parser = positive)]
    pub layers: usize,
    #[arg(long, default_value_t = lari_core::curation::STATS_RESOLUTION, value_parser = positive_u32)]
    pub size: u32,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = lari_core::curation::DEFAULT_ELEVATIONS)]
    pub elevations: Vec<f64>,
    #[arg(long, default_value_t = lari_core::curation::DEFAULT_AZIMUTHS, value_parser = positive)]
    pub azimuths: usize,
    #[arg(long, default_value_t = lari_core::curation::DEFAULT_RADIUS)]
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregateArg {
    Mean,
    Max,
}

impl From<AggregateArg> for Aggregate {
    fn from(a: AggregateArg) -> Aggregate {
        match a {
            AggregateArg::Mean => Aggregate::Mean,
            AggregateArg::Max => Aggregate::Max,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction: a .ply/.obj point cloud or .lari file, or a directory of them.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth .lari file, or a directory of them (paired by file stem).
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::ViewAligned)]
    pub mode: EvalMode,
    #[arg(long, value_delimiter = ',', default_values_t = Region::ALL)]
    pub region: Vec<Region>,
    /// Points sampled per cloud (default depends on cloud size).
    #[arg(long, value_parser = positive)]
    pub samples: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = lari_core::metrics::DEFAULT_THRESHOLDS)]
    pub thresholds: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep scene units instead of normalizing by the ground-truth diagonal.
    #[arg(long)]
    pub no_normalize: bool,
    /// Sample all layers once and split the sample by region.
    #[arg(long)]
    pub fixed_samples: bool,
    /// Report file (JSON lines); completed records are skipped on rerun.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaskEvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Append the record to this JSON-lines file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = Region::Overall)]
    pub region: Region,
    /// Write ASCII instead of binary little-endian.
    #[arg(long)]
    pub ascii: bool,
}

/// Errors raised by the tool itself rather than the library.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("no meshes found in {0}")]
    EmptyCorpus(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("all {0} work items failed")]
    AllFailed(usize),
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected a positive integer, got '{s}'")),
    }
}

fn positive_u32(s: &str) -> Result<u32, String> {
    positive(s).and_then(|n| u32::try_from(n).map_err(|e| e.to_string()))
}

fn floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()?;
    let n = v.len();
    let arr: [f64; N] = v.try_into().map_err(|_| format!("expected {N} comma-separated numbers, got {n}"))?;
    if arr.iter().all(|x| x.is_finite()) {
        Ok(arr)
    } else {
        Err("values must be finite".into())
    }
}

fn vec3(s: &str) -> Result<[f64; 3], String> {
    floats::<3>(s)
}

fn mat4(s: &str) -> Result<[f64; 16], String> {
    floats::<16>(s)
}

/// Runs a parsed command line inside a worker pool of the requested size.
pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    pool.install(|| match cli.command {
        Command::Render(a) => render::cmd_render(&a),
        Command::Views(a) => render::cmd_views(&a),
        Command::Filter(a) => filter::cmd_filter(&a).map(|_| ()),
        Command::Eval(a) => eval::cmd_eval(&a).map(|_| ()),
        Command::MaskEval(a) => eval::cmd_mask_eval(&a).map(|_| ()),
        Command::Export(a) => render::cmd_export(&a),
    })
}

/// Short machine-readable name for the innermost known error in the chain.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<IoError>() {
            return match e {
                IoError::Io { .. } => "io_error",
                IoError::Parse { .. } => "parse_error",
                IoError::UnsupportedFormat(_) => "unsupported_format",
                IoError::CorruptHeader(_) => "corrupt_header",
                IoError::VersionMismatch { .. } => "version_mismatch",
                IoError::TruncatedFile { .. } => "truncated_file",
                IoError::CorruptBody(_) => "corrupt_body",
                IoError::TooManyLayers(_) => "too_many_layers",
                IoError::ShapeMismatch(_) => "shape_mismatch",
                IoError::EmptyCloud => "empty_cloud",
                IoError::InvalidRotation => "invalid_rotation",
                IoError::Mesh(_) => "mesh_error",
                IoError::Render(_) => "render_error",
            };
        }
        if let Some(e) = cause.downcast_ref::<MetricsError>() {
            return match e {
                MetricsError::ShapeMismatch(_) => "shape_mismatch",
                MetricsError::EmptyRegion(_) => "empty_region",
                MetricsError::EmptyCloud => "empty_cloud",
                _ => "metrics_error",
            };
        }
        if cause.downcast_ref::<RenderError>().is_some() {
            return "render_error";
        }
        if cause.downcast_ref::<CurationError>().is_some() {
            return "curation_error";
        }
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::EmptyCorpus(_) => "empty_corpus",
                CliError::InvalidArgument(_) => "invalid_argument",
                CliError::AllFailed(_) => "all_failed",
            };
        }
    }
    "error"
}

/// `{"kind": ..., "message": ...}` for a failed unit of work.
pub fn error_json(err: &anyhow::Error) -> serde_json::Value {
    json!({ "kind": error_kind(err), "message": format!("{err:#}") })
}

/// Entry point shared by the binary: parses `args`, runs, and reports errors
/// as one JSON object on stderr.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": error_json(&e) }));
            ExitCode::FAILURE
        }
    }
}
