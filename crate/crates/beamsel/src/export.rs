//! Pattern cuts and measured metrics for a weight matrix file.

use std::path::{Path, PathBuf};

use beamsel_core::engine::CutConfig;
use beamsel_core::pattern::{measure_beamwidth, measure_sll, SllWindow};
use beamsel_core::{ArrayGeometry, CutKind, Direction, PatternCut, PatternEngine, PatternMetrics};

use crate::error::{CliError, CliResult};
use crate::formats;

#[derive(Debug, Clone, PartialEq)]
pub struct ExportedPattern {
    pub az_csv: PathBuf,
    pub el_csv: PathBuf,
    pub metrics_json: PathBuf,
    pub metrics: PatternMetrics,
}

/// Writes `<prefix>_az.csv`, `<prefix>_el.csv` (cuts through the pattern
/// peak) and `<prefix>_metrics.json`. `hint` seeds the peak search; without
/// it the field of view is scanned.
pub fn export_pattern(
    geometry: &ArrayGeometry,
    weights_path: &Path,
    cut: CutConfig,
    hint: Option<Direction>,
    prefix: &Path,
) -> CliResult<ExportedPattern> {
    let weights = formats::read_weights(weights_path)?;
    let engine = PatternEngine::new(geometry.clone()).with_cut(cut);
    let (peak, az, el) = engine.cuts(&weights, hint).map_err(|e| CliError::stage("export-pattern", e))?;
    let metrics = engine.measure(&weights, Some(peak)).map_err(|e| CliError::stage("export-pattern", e))?;
    let name = prefix.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let with_suffix = |s: &str| prefix.with_file_name(format!("{name}{s}"));
    let out = ExportedPattern {
        az_csv: with_suffix("_az.csv"),
        el_csv: with_suffix("_el.csv"),
        metrics_json: with_suffix("_metrics.json"),
        metrics,
    };
    formats::write_cut(&out.az_csv, az.samples())?;
    formats::write_cut(&out.el_csv, el.samples())?;
    formats::write_json(&out.metrics_json, &metrics)?;
    Ok(out)
}

/// Beamwidth and SLL of a cut read back from CSV.
pub fn measure_cut_file(geometry: &ArrayGeometry, path: &Path, kind: CutKind) -> CliResult<(f64, f64)> {
    let samples = formats::read_cut(path)?;
    let cut = PatternCut::from_samples(kind, 0.0, samples).map_err(|e| CliError::io(path, e))?;
    let bw = measure_beamwidth(&cut).map_err(|e| CliError::io(path, e))?;
    let sll = measure_sll(&cut, &SllWindow::for_geometry(geometry, kind)).map_err(|e| CliError::io(path, e))?;
    Ok((bw, sll))
}
