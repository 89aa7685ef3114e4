//! On-disk artifact formats. Everything is JSON or CSV.

use std::fs;
use std::path::{Path, PathBuf};

use beamsel_core::classifier::{EpochStats, RocPoint, TrainingReport};
use beamsel_core::clustering::{ClusterModel, FeatureNormalizer, Features};
use beamsel_core::cost::{FEATURE_COUNT, FEATURE_NAMES};
use beamsel_core::WeightMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Parses a JSON file. Syntax and schema errors report line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

/// JSON form of a weight matrix: row-major amplitude, phase and 0/1 mask
/// arrays plus the drive power per active chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightMatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub amp: Vec<f64>,
    pub phase_rad: Vec<f64>,
    pub mask: Vec<u8>,
    pub per_element_power_w: f64,
}

impl From<&WeightMatrix> for WeightMatrixFile {
    fn from(w: &WeightMatrix) -> Self {
        Self {
            rows: w.rows(),
            cols: w.cols(),
            amp: w.amplitudes().to_vec(),
            phase_rad: w.phases().to_vec(),
            mask: w.active().iter().map(|&a| a as u8).collect(),
            per_element_power_w: w.per_element_power(),
        }
    }
}

impl TryFrom<WeightMatrixFile> for WeightMatrix {
    type Error = beamsel_core::Error;

    fn try_from(f: WeightMatrixFile) -> beamsel_core::Result<Self> {
        if let Some(i) = f.mask.iter().position(|&m| m > 1) {
            return Err(beamsel_core::Error::Domain(format!("mask entry {i} is {}, expected 0 or 1", f.mask[i])));
        }
        WeightMatrix::new(f.rows, f.cols, f.amp, f.phase_rad, f.mask.iter().map(|&m| m == 1).collect(), f.per_element_power_w)
    }
}

pub fn write_weights(path: &Path, w: &WeightMatrix) -> CliResult<()> {
    write_json(path, &WeightMatrixFile::from(w))
}

pub fn read_weights(path: &Path) -> CliResult<WeightMatrix> {
    let file: WeightMatrixFile = read_json(path)?;
    WeightMatrix::try_from(file).map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    ensure_parent(path)?;
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

fn csv_reader(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))
}

/// Error for a bad CSV field, with the file line and column name.
fn field_error(path: &Path, record: &csv::StringRecord, column: &str, msg: impl std::fmt::Display) -> CliError {
    let line = record.position().map(|p| p.line()).unwrap_or(0);
    CliError::Io(format!("{}:{line}: field `{column}`: {msg}", path.display()))
}

fn parse_f64(path: &Path, record: &csv::StringRecord, idx: usize, column: &str) -> CliResult<f64> {
    let raw = record.get(idx).ok_or_else(|| field_error(path, record, column, "missing"))?;
    let x: f64 = raw.trim().parse().map_err(|e| field_error(path, record, column, format!("`{raw}`: {e}")))?;
    if !x.is_finite() {
        return Err(field_error(path, record, column, "not finite"));
    }
    Ok(x)
}

fn check_header(path: &Path, reader: &mut csv::Reader<fs::File>, expected: &[&str]) -> CliResult<()> {
    let header = reader.headers().map_err(|e| CliError::io(path, e))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(CliError::Io(format!("{}:1: expected header {:?}, found {:?}", path.display(), expected, got)));
    }
    Ok(())
}

fn records(path: &Path, reader: &mut csv::Reader<fs::File>) -> CliResult<Vec<csv::StringRecord>> {
    reader.records().collect::<Result<_, _>>().map_err(|e| CliError::io(path, e))
}

pub const CUT_HEADER: [&str; 2] = ["angle_deg", "mag_db"];

pub fn write_cut(path: &Path, samples: &[(f64, f64)]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CUT_HEADER).map_err(|e| CliError::io(path, e))?;
    for (angle, db) in samples {
        w.write_record([angle.to_string(), db.to_string()]).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_cut(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let mut r = csv_reader(path)?;
    check_header(path, &mut r, &CUT_HEADER)?;
    records(path, &mut r)?
        .iter()
        .map(|rec| Ok((parse_f64(path, rec, 0, "angle_deg")?, parse_f64(path, rec, 1, "mag_db")?)))
        .collect()
}

/// Requirement dataset: the seven features, plus a `label` column once
/// clustered.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Features>,
    pub labels: Option<Vec<usize>>,
}

pub fn write_dataset(path: &Path, data: &Dataset) -> CliResult<()> {
    if let Some(labels) = &data.labels {
        if labels.len() != data.features.len() {
            return Err(CliError::Stage("label count does not match sample count".into()));
        }
    }
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
    if data.labels.is_some() {
        header.push("label");
    }
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for (i, f) in data.features.iter().enumerate() {
        let mut row: Vec<String> = f.iter().map(|x| x.to_string()).collect();
        if let Some(labels) = &data.labels {
            row.push(labels[i].to_string());
        }
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| CliError::io(path, e))?.clone();
    let labeled = header.len() == FEATURE_COUNT + 1;
    let mut expected: Vec<&str> = FEATURE_NAMES.to_vec();
    if labeled {
        expected.push("label");
    }
    check_header(path, &mut r, &expected)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for rec in records(path, &mut r)? {
        let mut f = [0.0; FEATURE_COUNT];
        for (j, name) in FEATURE_NAMES.iter().enumerate() {
            f[j] = parse_f64(path, &rec, j, name)?;
        }
        features.push(f);
        if labeled {
            let raw = rec.get(FEATURE_COUNT).unwrap_or("");
            let label = raw.trim().parse().map_err(|e| field_error(path, &rec, "label", format!("`{raw}`: {e}")))?;
            labels.push(label);
        }
    }
    Ok(Dataset { features, labels: labeled.then_some(labels) })
}

/// Cluster model on disk: centroids in normalized units, the normalizer and
/// the representative matrix files relative to the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterModelFile {
    pub k: usize,
    pub centroids: Vec<Features>,
    pub normalizer: FeatureNormalizer,
    pub inertia: f64,
    pub representatives: Vec<String>,
}

impl ClusterModelFile {
    pub fn new(model: &ClusterModel, representatives: Vec<String>) -> Self {
        Self {
            k: model.k,
            centroids: model.centroids.clone(),
            normalizer: model.normalizer.clone(),
            inertia: model.inertia,
            representatives,
        }
    }

    pub fn model(&self) -> ClusterModel {
        ClusterModel {
            k: self.k,
            centroids: self.centroids.clone(),
            normalizer: self.normalizer.clone(),
            inertia: self.inertia,
        }
    }

    /// Parses and checks the internal consistency of a model file.
    pub fn read(path: &Path) -> CliResult<Self> {
        let file: Self = read_json(path)?;
        if file.k == 0 || file.centroids.len() != file.k || file.representatives.len() != file.k {
            return Err(CliError::Io(format!(
                "{}: k = {} but {} centroids and {} representative paths",
                path.display(),
                file.k,
                file.centroids.len(),
                file.representatives.len()
            )));
        }
        Ok(file)
    }

    /// Absolute paths of the representative files.
    pub fn representative_paths(&self, model_path: &Path) -> Vec<PathBuf> {
        let base = model_path.parent().unwrap_or(Path::new(""));
        self.representatives.iter().map(|r| base.join(r)).collect()
    }

    pub fn load_representatives(&self, model_path: &Path) -> CliResult<Vec<WeightMatrix>> {
        self.representative_paths(model_path).iter().map(|p| read_weights(p)).collect()
    }
}

/// Writes `curves.csv`, `confusion.csv` and one `roc_class_<i>.csv` per class
/// into `dir`. Returns the written paths.
pub fn write_report(dir: &Path, report: &TrainingReport) -> CliResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    let curves = dir.join("curves.csv");
    let mut w = csv_writer(&curves)?;
    w.write_record(["epoch", "train_loss", "val_loss", "train_acc", "val_acc"]).map_err(|e| CliError::io(&curves, e))?;
    for EpochStats { epoch, train_loss, val_loss, train_acc, val_acc } in &report.curves {
        w.write_record([epoch.to_string(), train_loss.to_string(), val_loss.to_string(), train_acc.to_string(), val_acc.to_string()])
            .map_err(|e| CliError::io(&curves, e))?;
    }
    w.flush().map_err(|e| CliError::io(&curves, e))?;
    paths.push(curves);

    let confusion = dir.join("confusion.csv");
    let mut w = csv_writer(&confusion)?;
    let k = report.confusion.len();
    let header: Vec<String> = (0..k).map(|j| format!("pred_{j}")).collect();
    w.write_record(&header).map_err(|e| CliError::io(&confusion, e))?;
    for row in &report.confusion {
        w.write_record(row.iter().map(|c| c.to_string())).map_err(|e| CliError::io(&confusion, e))?;
    }
    w.flush().map_err(|e| CliError::io(&confusion, e))?;
    paths.push(confusion);

    for (i, curve) in report.roc.iter().enumerate() {
        let path = dir.join(format!("roc_class_{i}.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record(["threshold", "tpr", "fpr"]).map_err(|e| CliError::io(&path, e))?;
        for RocPoint { threshold, tpr, fpr } in curve {
            w.write_record([threshold.to_string(), tpr.to_string(), fpr.to_string()]).map_err(|e| CliError::io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads back `curves.csv`.
pub fn read_curves(path: &Path) -> CliResult<Vec<EpochStats>> {
    let mut r = csv_reader(path)?;
    check_header(path, &mut r, &["epoch", "train_loss", "val_loss", "train_acc", "val_acc"])?;
    records(path, &mut r)?
        .iter()
        .map(|rec| {
            Ok(EpochStats {
                epoch: parse_f64(path, rec, 0, "epoch")? as usize,
                train_loss: parse_f64(path, rec, 1, "train_loss")?,
                val_loss: parse_f64(path, rec, 2, "val_loss")?,
                train_acc: parse_f64(path, rec, 3, "train_acc")?,
                val_acc: parse_f64(path, rec, 4, "val_acc")?,
            })
        })
        .collect()
}

/// Reads back `confusion.csv`.
pub fn read_confusion(path: &Path) -> CliResult<Vec<Vec<usize>>> {
    let mut r = csv_reader(path)?;
    records(path, &mut r)?
        .iter()
        .map(|rec| {
            rec.iter()
                .enumerate()
                .map(|(j, raw)| raw.trim().parse().map_err(|e| field_error(path, rec, &format!("pred_{j}"), e)))
                .collect()
        })
        .collect()
}

/// Writes a plain table of numbers with a header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|x| x.to_string())).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
