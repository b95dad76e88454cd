use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{anyhow, Context, Result};
use clap::ValueEnum;
use lari_core::io::{load_points, read_lari};
use lari_core::metrics::{
    canonical_register, default_sample_count, evaluate_view_aligned, mask_metrics, sample_points,
    CanonicalOptions, EvalOptions, MetricsError, MetricsRecord, Prediction, Region,
};
use lari_core::render::{mask_from_index, select_points_in_layers, IntersectionMask, LariMap};
use nalgebra::Point3;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::journal::{read_records, render_lines, str_field, Journal, Record};
use crate::{error_json, CliError, EvalArgs, MaskEvalArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Prediction and ground truth share the camera frame; scale-shift alignment only.
    ViewAligned,
    /// Unknown relative pose; rotation search plus trimmed ICP first.
    Canonical,
}

/// Outcome of an evaluation run over the requested (id, region) units.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub succeeded: usize,
    pub failed: usize,
    /// Per region: record count, mean Chamfer distance and mean F-scores.
    pub means: Vec<RegionMean>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMean {
    pub region: Region,
    pub count: usize,
    pub cd: Option<f64>,
    pub fs: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
struct Pair {
    id: String,
    pred: Option<PathBuf>,
    gt: PathBuf,
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// A single file pair, or every `.lari` in the ground-truth directory paired
/// with the prediction of the same stem (`.lari`, `.ply` or `.obj`).
fn discover_pairs(pred: &Path, gt: &Path) -> Result<Vec<Pair>> {
    if !gt.is_dir() {
        if pred.is_dir() {
            return Err(CliError::InvalidArgument("--pred is a directory but --gt is a file".into()).into());
        }
        return Ok(vec![Pair {
            id: stem(gt),
            pred: Some(pred.to_path_buf()),
            gt: gt.to_path_buf(),
        }]);
    }
    if !pred.is_dir() {
        return Err(CliError::InvalidArgument("--gt is a directory but --pred is not".into()).into());
    }
    let mut gts: Vec<PathBuf> = std::fs::read_dir(gt)
        .with_context(|| format!("listing {}", gt.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && has_ext(p, "lari"))
        .collect();
    gts.sort();
    if gts.is_empty() {
        return Err(CliError::InvalidArgument(format!("no .lari files in {}", gt.display())).into());
    }
    Ok(gts
        .into_iter()
        .map(|g| {
            let id = stem(&g);
            let pred = ["lari", "ply", "obj"]
                .iter()
                .map(|ext| pred.join(format!("{id}.{ext}")))
                .find(|p| p.is_file());
            Pair { id, pred, gt: g }
        })
        .collect())
}

enum PredData {
    Layered(LariMap, IntersectionMask),
    Cloud(Vec<Point3<f64>>),
}

fn load_layered(path: &Path) -> Result<(LariMap, IntersectionMask)> {
    let (map, index) = read_lari(path).with_context(|| format!("reading {}", path.display()))?;
    let mask = mask_from_index(&index, map.layers())?;
    Ok((map, mask))
}

fn load_pred(path: &Path) -> Result<PredData> {
    if has_ext(path, "lari") {
        let (map, mask) = load_layered(path)?;
        Ok(PredData::Layered(map, mask))
    } else {
        let pts = load_points(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(PredData::Cloud(pts))
    }
}

fn region_cloud(map: &LariMap, mask: &IntersectionMask, region: Region) -> Result<Vec<Point3<f64>>> {
    Ok(select_points_in_layers(map, mask, region.layer_range(map.layers()))?
        .into_iter()
        .map(|(p, _)| p)
        .collect())
}

fn object(v: Value) -> Record {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("records are objects"),
    }
}

fn evaluate_region(
    id: &str,
    pred: &PredData,
    gt: &(LariMap, IntersectionMask),
    region: Region,
    a: &EvalArgs,
) -> Result<Record> {
    let (gt_map, gt_mask) = gt;
    match a.mode {
        EvalMode::ViewAligned => {
            let p = match pred {
                PredData::Layered(map, mask) => Prediction::Layered { map, mask },
                PredData::Cloud(pts) => Prediction::Cloud(pts),
            };
            let opts = EvalOptions {
                n_samples: a.samples,
                thresholds: a.thresholds.clone(),
                seed: a.seed,
                normalize: !a.no_normalize,
                fixed_samples: a.fixed_samples,
            };
            let report = evaluate_view_aligned(p, gt_map, gt_mask, region, &opts)?;
            Ok(object(MetricsRecord { image_id: id.to_string(), report }.to_json()))
        }
        EvalMode::Canonical => {
            let gt_pts = region_cloud(gt_map, gt_mask, region)?;
            if gt_pts.is_empty() {
                return Err(MetricsError::EmptyRegion(region).into());
            }
            let pred_pts = match pred {
                PredData::Layered(map, mask) => region_cloud(map, mask, region)?,
                PredData::Cloud(pts) => pts.clone(),
            };
            if pred_pts.is_empty() {
                return Err(MetricsError::EmptyCloud.into());
            }
            let n = a.samples.unwrap_or_else(|| default_sample_count(pred_pts.len(), gt_pts.len()));
            let ps = sample_points(&pred_pts, n, a.seed)?;
            let gs = sample_points(&gt_pts, n, a.seed)?;
            let opts = CanonicalOptions {
                thresholds: a.thresholds.clone(),
                seed: a.seed,
                normalize: !a.no_normalize,
                ..CanonicalOptions::default()
            };
            let reg = canonical_register(&ps, &gs, &opts)?;
            let mut report = reg.report;
            report.region = region;
            let mut rec = object(MetricsRecord { image_id: id.to_string(), report }.to_json());
            rec.insert(
                "registration".into(),
                json!({
                    "rotation_deg": reg.transform.angle().to_degrees(),
                    "scale": reg.transform.scale,
                    "init": reg.init_index,
                    "failed_inits": reg.failed_inits,
                }),
            );
            Ok(rec)
        }
    }
}

fn region_rank(name: &str) -> usize {
    Region::ALL.iter().position(|r| r.as_str() == name).unwrap_or(usize::MAX)
}

fn record_key(r: &Record) -> (String, usize) {
    (str_field(r, "image_id").to_string(), region_rank(str_field(r, "region")))
}

fn failure(id: &str, region: Region, e: &anyhow::Error) -> Record {
    object(json!({ "image_id": id, "region": region.as_str(), "error": error_json(e) }))
}

fn evaluate_pair(pair: &Pair, regions: &[Region], a: &EvalArgs) -> Vec<Record> {
    let loaded = (|| -> Result<_> {
        let pred_path = pair
            .pred
            .as_ref()
            .ok_or_else(|| anyhow!("no prediction found for '{}'", pair.id))?;
        Ok((load_pred(pred_path)?, load_layered(&pair.gt)?))
    })();
    match loaded {
        Ok((pred, gt)) => regions
            .iter()
            .map(|&region| {
                evaluate_region(&pair.id, &pred, &gt, region, a)
                    .unwrap_or_else(|e| failure(&pair.id, region, &e))
            })
            .collect(),
        Err(e) => regions.iter().map(|&r| failure(&pair.id, r, &e)).collect(),
    }
}

fn validate(a: &EvalArgs) -> Result<()> {
    if a.region.is_empty() {
        return Err(CliError::InvalidArgument("no --region given".into()).into());
    }
    if let Some(t) = a.thresholds.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(CliError::InvalidArgument(format!("threshold {t} must be positive")).into());
    }
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<EvalSummary> {
    validate(a)?;
    let mut regions: Vec<Region> = Vec::new();
    for r in &a.region {
        if !regions.contains(r) {
            regions.push(*r);
        }
    }
    let pairs = discover_pairs(&a.pred, &a.gt)?;

    let done: HashSet<(String, usize)> = match &a.out {
        Some(out) => read_records(out)?
            .iter()
            .filter(|r| !r.contains_key("error"))
            .map(record_key)
            .collect(),
        None => HashSet::new(),
    };
    let journal = a.out.as_deref().map(Journal::open).transpose()?;
    let memory = Mutex::new(Vec::new());
    pairs.par_iter().try_for_each(|pair| -> Result<()> {
        let pending: Vec<Region> = regions
            .iter()
            .copied()
            .filter(|r| !done.contains(&(pair.id.clone(), region_rank(r.as_str()))))
            .collect();
        if pending.is_empty() {
            return Ok(());
        }
        for rec in evaluate_pair(pair, &pending, a) {
            match &journal {
                Some(j) => j.append(&rec)?,
                None => memory.lock().expect("record buffer").push(rec),
            }
        }
        Ok(())
    })?;
    let records = match journal {
        Some(j) => j.finish(record_key)?,
        None => {
            let mut recs = memory.into_inner().expect("record buffer");
            recs.sort_by_key(record_key);
            print!("{}", render_lines(&recs));
            recs
        }
    };

    let wanted: HashSet<(String, usize)> = pairs
        .iter()
        .flat_map(|p| regions.iter().map(move |r| (p.id.clone(), region_rank(r.as_str()))))
        .collect();
    let relevant: Vec<&Record> = records.iter().filter(|r| wanted.contains(&record_key(r))).collect();
    let failed = relevant.iter().filter(|r| r.contains_key("error")).count();
    let succeeded = relevant.len() - failed;
    let summary = EvalSummary {
        succeeded,
        failed,
        means: regions.iter().map(|&r| region_mean(&relevant, r)).collect(),
    };
    print_summary(&summary);
    if succeeded == 0 && failed > 0 {
        return Err(CliError::AllFailed(failed).into());
    }
    Ok(summary)
}

fn region_mean(records: &[&Record], region: Region) -> RegionMean {
    let ok: Vec<&&Record> = records
        .iter()
        .filter(|r| !r.contains_key("error") && str_field(r, "region") == region.as_str())
        .collect();
    let cds: Vec<f64> = ok.iter().filter_map(|r| r.get("cd").and_then(Value::as_f64)).collect();
    let keys: Vec<String> = ok
        .first()
        .map(|r| r.keys().filter(|k| k.starts_with("fs@")).cloned().collect())
        .unwrap_or_default();
    let fs = keys
        .into_iter()
        .map(|k| {
            let sum: f64 = ok.iter().filter_map(|r| r.get(&k).and_then(Value::as_f64)).sum();
            let mean = sum / ok.len() as f64;
            (k, mean)
        })
        .collect();
    RegionMean {
        region,
        count: ok.len(),
        cd: (!cds.is_empty()).then(|| cds.iter().sum::<f64>() / cds.len() as f64),
        fs,
    }
}

fn print_summary(s: &EvalSummary) {
    println!("evaluated {} record(s), {} failed", s.succeeded, s.failed);
    for m in &s.means {
        let cd = m.cd.map_or("-".to_string(), |v| format!("{v:.6}"));
        let fs: Vec<String> = m.fs.iter().map(|(k, v)| format!("{k} {v:.4}")).collect();
        println!("{:<8} n={:<6} cd {cd}  {}", m.region.as_str(), m.count, fs.join("  "));
    }
}

pub fn cmd_mask_eval(a: &MaskEvalArgs) -> Result<Record> {
    let (_, pred) = load_layered(&a.pred)?;
    let (_, gt) = load_layered(&a.gt)?;
    let scores = mask_metrics(&pred, &gt)?;
    let rec = object(json!({
        "pred": a.pred.display().to_string(),
        "gt": a.gt.display().to_string(),
        "miou": scores.miou,
        "dice": scores.dice,
    }));
    println!("{}", serde_json::to_string(&rec)?);
    if let Some(out) = &a.out {
        Journal::open(out)?.append(&rec)?;
    }
    Ok(rec)
}
