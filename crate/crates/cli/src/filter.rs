use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lari_core::curation::{filter_object, layer_occupancy, sample_views, FilterThresholds, ViewSpec};
use lari_core::io::{load_mesh, MeshFormat};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::journal::{str_field, Journal, Record};
use crate::render::check_ids;
use crate::{error_json, CliError, FilterArgs};

/// Verdict counts over the whole manifest after a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterSummary {
    pub accepted: usize,
    pub rejected: usize,
    pub errors: usize,
}

#[derive(Debug, Clone)]
struct MeshItem {
    id: String,
    path: PathBuf,
}

#[derive(Deserialize)]
struct ManifestLine {
    #[serde(default)]
    id: Option<String>,
    mesh: PathBuf,
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Meshes of a directory (sorted by file name) or of a manifest whose lines
/// are either a path or `{"id": ..., "mesh": ...}`; relative paths resolve
/// against the manifest's directory.
fn discover(source: &Path) -> Result<Vec<MeshItem>> {
    let mut items = Vec::new();
    if source.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(source)
            .with_context(|| format!("listing {}", source.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && MeshFormat::from_path(p).is_ok())
            .collect();
        paths.sort();
        items.extend(paths.into_iter().map(|p| MeshItem { id: stem(&p), path: p }));
    } else {
        let text = std::fs::read_to_string(source)
            .with_context(|| format!("reading {}", source.display()))?;
        let base = source.parent().unwrap_or(Path::new(""));
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, path) = if line.starts_with('{') {
                let m: ManifestLine = serde_json::from_str(line)
                    .with_context(|| format!("{} line {}", source.display(), i + 1))?;
                (m.id, m.mesh)
            } else {
                (None, PathBuf::from(line))
            };
            let path = if path.is_relative() { base.join(path) } else { path };
            items.push(MeshItem {
                id: id.unwrap_or_else(|| stem(&path)),
                path,
            });
        }
    }
    if items.is_empty() {
        return Err(CliError::EmptyCorpus(source.display().to_string()).into());
    }
    check_ids(items.iter().map(|m| m.id.as_str()))?;
    Ok(items)
}

fn assess(item: &MeshItem, views: &[ViewSpec], a: &FilterArgs, thresholds: &FilterThresholds) -> Result<Value> {
    let mesh = load_mesh(&item.path, None)?;
    let stats = layer_occupancy(&mesh, views, a.layers, a.size)?;
    let verdict = filter_object(&stats, thresholds);
    Ok(json!({
        "id": item.id,
        "mesh": item.path.display().to_string(),
        "accepted": verdict.accepted,
        "reasons": verdict.reasons,
        "coverage": stats.coverage(thresholds.aggregate),
        "deep_fraction": stats.deep_fraction(thresholds.aggregate),
        "occupancy": { "mean": stats.mean, "max": stats.max },
        "triangles": mesh.len(),
    }))
}

pub fn cmd_filter(a: &FilterArgs) -> Result<FilterSummary> {
    let thresholds = FilterThresholds {
        max_deep_fraction: a.max_deep_fraction,
        min_coverage: a.min_coverage,
        aggregate: a.aggregate.into(),
    };
    for (name, v) in [("--max-deep-fraction", a.max_deep_fraction), ("--min-coverage", a.min_coverage)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::InvalidArgument(format!("{name} {v} outside [0, 1]")).into());
        }
    }
    if a.layers < 2 {
        return Err(CliError::InvalidArgument("--layers must be at least 2".into()).into());
    }
    let views = sample_views(&a.elevations, a.azimuths, a.radius, None);
    for v in &views {
        v.validate()?;
    }
    let items = discover(&a.meshes)?;

    let done: HashSet<String> = crate::journal::read_records(&a.out)?
        .iter()
        .filter(|r| !r.contains_key("error"))
        .map(|r| str_field(r, "id").to_string())
        .collect();
    let journal = Journal::open(&a.out)?;
    items
        .par_iter()
        .filter(|item| !done.contains(&item.id))
        .try_for_each(|item| {
            let value = assess(item, &views, a, &thresholds).unwrap_or_else(|e| {
                json!({
                    "id": item.id,
                    "mesh": item.path.display().to_string(),
                    "error": error_json(&e),
                })
            });
            let Value::Object(record) = value else { unreachable!() };
            journal.append(&record)
        })?;
    let records = journal.finish(|r| str_field(r, "id").to_string())?;
    let summary = summarize(&records);
    println!(
        "{} objects: accepted {}, rejected {}, errors {} -> {}",
        records.len(),
        summary.accepted,
        summary.rejected,
        summary.errors,
        a.out.display()
    );
    Ok(summary)
}

fn summarize(records: &[Record]) -> FilterSummary {
    let mut s = FilterSummary {
        accepted: 0,
        rejected: 0,
        errors: 0,
    };
    for r in records {
        match r.get("accepted").and_then(Value::as_bool) {
            Some(true) => s.accepted += 1,
            Some(false) => s.rejected += 1,
            None => s.errors += 1,
        }
    }
    s
}
