//! The staged pipeline: dataset, cluster, representatives, train, eval.
//!
//! Each stage reads the previous stages' files from the output directory
//! and writes its own, then records the SHA-256 of every output in
//! `manifest.json`. Before a stage runs, the files of all earlier stages are
//! re-hashed against the manifest, so a missing or edited artifact stops the
//! pipeline before anything is built on top of it.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use beamsel_core::classifier::{self, MlpModel, TrainError, TrainingBatch};
use beamsel_core::clustering::{self, ClusterModel};
use beamsel_core::cost::{evaluate_cost, FEATURE_COUNT};
use beamsel_core::optimizer::{optimize_matrix, Knobs, OptimizeError, OptimizeOutcome};
use beamsel_core::{BeamRequirement, CostBreakdown, PatternEngine, PatternMetrics, WeightMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{self, ClusterModelFile, Dataset};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Dataset,
    Cluster,
    Representatives,
    Train,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Dataset, Stage::Cluster, Stage::Representatives, Stage::Train, Stage::Eval];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Dataset => "dataset",
            Stage::Cluster => "cluster",
            Stage::Representatives => "representatives",
            Stage::Train => "train",
            Stage::Eval => "eval",
        }
    }

    /// Stages whose outputs this one consumes (all earlier ones).
    pub fn prerequisites(self) -> &'static [Stage] {
        let i = Stage::ALL.iter().position(|&s| s == self).expect("stage is listed");
        &Stage::ALL[..i]
    }

    fn seed_name(self) -> &'static str {
        match self {
            Stage::Dataset => seeds::DATASET,
            Stage::Cluster => seeds::CLUSTER,
            Stage::Representatives => seeds::REPRESENTATIVES,
            Stage::Train => seeds::TRAIN,
            Stage::Eval => seeds::EVAL,
        }
    }
}

/// File names inside the output directory.
pub mod paths {
    pub const MANIFEST: &str = "manifest.json";
    pub const DATASET: &str = "dataset.csv";
    pub const LABELED: &str = "labeled.csv";
    pub const CLUSTER_MODEL: &str = "cluster_model.json";
    pub const INERTIA: &str = "kmeans_inertia.csv";
    pub const REP_DIR: &str = "representatives";
    pub const CROSS_COST: &str = "representatives/cross_cost.csv";
    pub const MLP_MODEL: &str = "mlp_model.json";
    pub const SPLIT: &str = "split.json";
    pub const REPORT_DIR: &str = "report";
    pub const TRAIN_SUMMARY: &str = "report/summary.json";
    pub const EVAL_ROWS: &str = "eval/errors.csv";
    pub const EVAL_SUMMARY: &str = "eval/summary.json";

    pub fn representative(i: usize) -> String {
        format!("{REP_DIR}/rep_{i:02}.json")
    }

    pub fn oracle_record(i: usize) -> String {
        format!("{REP_DIR}/rep_{i:02}_oracle.json")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    /// Path relative to the output directory, with `/` separators.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub seed: u64,
    pub seconds: f64,
    pub outputs: Vec<FileHash>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    pub config_sha256: String,
    /// Completed stages in pipeline order.
    pub stages: Vec<StageRecord>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn config_hash(cfg: &PipelineConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Manifest {
    pub fn load(out_dir: &Path) -> CliResult<Option<Self>> {
        let path = out_dir.join(paths::MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        formats::read_json(&path).map(Some)
    }

    pub fn record(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage)
    }

    /// Re-hashes the outputs of `stages` and fails on the first missing
    /// record, missing file or hash mismatch.
    pub fn verify(&self, out_dir: &Path, stages: &[Stage]) -> CliResult<()> {
        for &stage in stages {
            let record = self.record(stage).ok_or_else(|| {
                CliError::Config(format!("stage `{}` has not completed in {}", stage.name(), out_dir.display()))
            })?;
            for out in &record.outputs {
                let path = out_dir.join(&out.path);
                if !path.exists() {
                    return Err(CliError::Config(format!("artifact {} of stage `{}` is missing", out.path, stage.name())));
                }
                if sha256_file(&path)? != out.sha256 {
                    return Err(CliError::Config(format!(
                        "artifact {} of stage `{}` changed since it was written",
                        out.path,
                        stage.name()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Checks that every stage before `stage` completed and its files are intact.
pub fn verify_prerequisites(out_dir: &Path, stage: Stage) -> CliResult<()> {
    let prereqs = stage.prerequisites();
    if prereqs.is_empty() {
        return Ok(());
    }
    let manifest = Manifest::load(out_dir)?
        .ok_or_else(|| CliError::Config(format!("no manifest in {}; run `{}` first", out_dir.display(), prereqs[0].name())))?;
    manifest.verify(out_dir, prereqs)
}

fn relative(out_dir: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(out_dir).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// Hashes `outputs`, then stores the stage record, dropping records of this
/// and every later stage since they may no longer match.
fn commit(cfg: &PipelineConfig, stage: Stage, seconds: f64, outputs: &[PathBuf]) -> CliResult<StageRecord> {
    let out_dir = &cfg.out_dir;
    let mut manifest = Manifest::load(out_dir)?.unwrap_or(Manifest {
        master_seed: cfg.seed,
        config_sha256: String::new(),
        stages: Vec::new(),
    });
    manifest.master_seed = cfg.seed;
    manifest.config_sha256 = config_hash(cfg);
    manifest.stages.retain(|r| r.stage < stage);
    let outputs = outputs
        .iter()
        .map(|p| Ok(FileHash { path: relative(out_dir, p), sha256: sha256_file(p)? }))
        .collect::<CliResult<Vec<_>>>()?;
    let record = StageRecord { stage, seed: seeds::stage_seed(cfg.seed, stage.seed_name()), seconds, outputs };
    manifest.stages.push(record.clone());
    formats::write_json(&out_dir.join(paths::MANIFEST), &manifest)?;
    Ok(record)
}

/// Draws `n` requirements uniformly and independently per feature.
pub fn sample_requirements(cfg: &PipelineConfig, n: usize, seed: u64) -> Vec<BeamRequirement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r: [f64; 2]| if r[0] == r[1] { r[0] } else { rng.gen_range(r[0]..=r[1]) };
    (0..n)
        .map(|_| {
            let f: [f64; FEATURE_COUNT] = [
                draw(cfg.bw_range_deg),
                draw(cfg.bw_range_deg),
                draw(cfg.sll_range_db),
                draw(cfg.sll_range_db),
                draw(cfg.eirp_range_dbw),
                draw(cfg.pointing_range_deg),
                draw(cfg.pointing_range_deg),
            ];
            BeamRequirement::from_features(&f)
        })
        .collect()
}

pub fn engine_for(cfg: &PipelineConfig) -> CliResult<PatternEngine> {
    Ok(PatternEngine::new(cfg.geometry()?))
}

/// Writes `dataset.csv` with `cfg.samples` unlabeled requirements.
pub fn generate_dataset(cfg: &PipelineConfig) -> CliResult<PathBuf> {
    cfg.validate()?;
    let reqs = sample_requirements(cfg, cfg.samples, seeds::stage_seed(cfg.seed, seeds::DATASET));
    let path = cfg.out_dir.join(paths::DATASET);
    formats::write_dataset(&path, &Dataset { features: reqs.iter().map(|r| r.to_features()).collect(), labels: None })?;
    Ok(path)
}

fn run_cluster(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let out = &cfg.out_dir;
    let data = formats::read_dataset(&out.join(paths::DATASET))?;
    let (model, fit) = clustering::kmeans_fit(&data.features, &cfg.kmeans_config()).map_err(|e| CliError::stage("cluster", e))?;
    let labeled = out.join(paths::LABELED);
    formats::write_dataset(&labeled, &Dataset { features: data.features, labels: Some(fit.labels) })?;
    let model_path = out.join(paths::CLUSTER_MODEL);
    let reps = (0..model.k).map(paths::representative).collect();
    formats::write_json(&model_path, &ClusterModelFile::new(&model, reps))?;
    let inertia = out.join(paths::INERTIA);
    let rows: Vec<Vec<f64>> = fit.inertia_history.iter().enumerate().map(|(i, x)| vec![i as f64, *x]).collect();
    formats::write_table(&inertia, &["iteration", "inertia"], &rows)?;
    Ok(vec![labeled, model_path, inertia])
}

/// What the oracle reported for one cluster representative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub cluster: usize,
    pub requirement: BeamRequirement,
    pub knobs: Knobs,
    pub metrics: PatternMetrics,
    pub cost: CostBreakdown,
    pub evaluations: usize,
}

fn oracle_record(cluster: usize, requirement: BeamRequirement, o: &OptimizeOutcome) -> OracleRecord {
    OracleRecord { cluster, requirement, knobs: o.knobs, metrics: o.metrics, cost: o.cost, evaluations: o.evaluations }
}

/// `cost[i][j]`: cost of representative `j`, re-steered to centroid `i`,
/// against centroid `i`'s requirement. Unmeasurable patterns cost infinity.
pub fn cross_cost_matrix(
    cfg: &PipelineConfig,
    engine: &PatternEngine,
    model: &ClusterModel,
    reps: &[WeightMatrix],
) -> CliResult<Vec<Vec<f64>>> {
    (0..model.k)
        .into_par_iter()
        .map(|i| {
            let req = model.centroid_requirement(i);
            reps.iter()
                .map(|w| {
                    let steered = classifier::resteer(engine, w, &req)?;
                    Ok(match engine.measure(&steered, Some(req.pointing())) {
                        Ok(m) => evaluate_cost(&req, &m, &cfg.cost_weights(), cfg.eirp_mode)?.total,
                        Err(_) => f64::INFINITY,
                    })
                })
                .collect::<beamsel_core::Result<Vec<f64>>>()
                .map_err(CliError::from)
        })
        .collect()
}

fn run_representatives(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let out = &cfg.out_dir;
    let model_path = out.join(paths::CLUSTER_MODEL);
    let file = ClusterModelFile::read(&model_path)?;
    let model = file.model();
    let engine = engine_for(cfg)?;
    let results: Vec<Result<OptimizeOutcome, OptimizeError>> = (0..model.k)
        .into_par_iter()
        .map(|i| {
            let seed = seeds::item_seed(cfg.seed, seeds::REPRESENTATIVES, i);
            optimize_matrix(&engine, &model.centroid_requirement(i), &cfg.optimizer_config(seed))
        })
        .collect();
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    let mut reps = Vec::new();
    for (i, result) in results.iter().enumerate() {
        let req = model.centroid_requirement(i);
        match result {
            Ok(o) => {
                let w = out.join(paths::representative(i));
                let r = out.join(paths::oracle_record(i));
                formats::write_weights(&w, &o.weights)?;
                formats::write_json(&r, &oracle_record(i, req, o))?;
                outputs.extend([w, r]);
                reps.push(o.weights.clone());
            }
            Err(e) => failures.push(format!("cluster {i}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::stage("representatives", failures.join("; ")));
    }
    let cross = cross_cost_matrix(cfg, &engine, &model, &reps)?;
    let header: Vec<String> = (0..model.k).map(|j| format!("rep_{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let cross_path = out.join(paths::CROSS_COST);
    formats::write_table(&cross_path, &header, &cross)?;
    outputs.push(cross_path);
    Ok(outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub per_class_recall: Vec<f64>,
    pub roc_auc: Vec<f64>,
}

/// Labeled dataset split into training and validation batches.
pub fn load_training_data(cfg: &PipelineConfig) -> CliResult<(TrainingBatch, TrainingBatch, Split)> {
    let data = formats::read_dataset(&cfg.out_dir.join(paths::LABELED))?;
    let labels = data.labels.ok_or_else(|| CliError::Config(format!("{} has no label column", paths::LABELED)))?;
    let file = ClusterModelFile::read(&cfg.out_dir.join(paths::CLUSTER_MODEL))?;
    let norm = &file.normalizer;
    let inputs = data.features.iter().map(|f| norm.transform(f)).collect();
    let all = TrainingBatch::new(inputs, labels, file.k).map_err(|e| CliError::stage("train", e))?;
    let (train, val) = classifier::stratified_split(&all.labels, file.k, cfg.val_fraction, seeds::stage_seed(cfg.seed, seeds::SPLIT))
        .map_err(|e| CliError::stage("train", e))?;
    Ok((all.subset(&train), all.subset(&val), Split { train, val }))
}

fn run_train(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let out = &cfg.out_dir;
    let file = ClusterModelFile::read(&out.join(paths::CLUSTER_MODEL))?;
    if file.k != cfg.k {
        return Err(CliError::Config(format!("cluster model has k = {}, config has k = {}", file.k, cfg.k)));
    }
    let (train_set, val_set, split) = load_training_data(cfg)?;
    let init = MlpModel::init(
        &cfg.layer_sizes(),
        cfg.activation,
        file.normalizer.clone(),
        seeds::stage_seed(cfg.seed, seeds::TRAIN_INIT),
    )
    .map_err(CliError::from)?;
    let (model, report) = classifier::train(init, &train_set, &val_set, &cfg.train_config()).map_err(|e| match e {
        TrainError::Diverged { epoch, .. } => CliError::stage("train", format!("loss diverged at epoch {epoch}")),
        TrainError::Invalid(e) => CliError::stage("train", e),
    })?;
    let mlp = out.join(paths::MLP_MODEL);
    formats::write_json(&mlp, &model)?;
    let split_path = out.join(paths::SPLIT);
    formats::write_json(&split_path, &split)?;
    let mut outputs = vec![mlp, split_path];
    outputs.extend(formats::write_report(&out.join(paths::REPORT_DIR), &report)?);
    let best = report.curves.iter().find(|s| s.epoch == report.best_epoch).copied();
    let best = best.ok_or_else(|| CliError::stage("train", "no epoch completed"))?;
    let summary = TrainSummary {
        best_epoch: report.best_epoch,
        epochs_run: report.curves.len(),
        stopped_early: report.stopped_early,
        train_loss: best.train_loss,
        val_loss: best.val_loss,
        train_acc: best.train_acc,
        val_acc: best.val_acc,
        per_class_recall: classifier::per_class_recall(&report.confusion),
        roc_auc: report.roc.iter().map(|c| classifier::roc_auc(c)).collect(),
    };
    let summary_path = out.join(paths::TRAIN_SUMMARY);
    formats::write_json(&summary_path, &summary)?;
    outputs.push(summary_path);
    Ok(outputs)
}

/// Everything needed to answer requirements once training is done.
pub struct Selector {
    pub engine: PatternEngine,
    pub clusters: ClusterModel,
    pub representatives: Vec<WeightMatrix>,
    pub model: MlpModel,
    pub trim_eirp: bool,
}

impl Selector {
    pub fn load(cfg: &PipelineConfig) -> CliResult<Self> {
        let out = &cfg.out_dir;
        let model_path = out.join(paths::CLUSTER_MODEL);
        let file = ClusterModelFile::read(&model_path)?;
        let representatives = file.load_representatives(&model_path)?;
        let model: MlpModel = formats::read_json(&out.join(paths::MLP_MODEL))?;
        model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { engine: engine_for(cfg)?, clusters: file.model(), representatives, model, trim_eirp: cfg.trim_eirp })
    }

    /// Chosen cluster and the matrix to apply (re-steered, and EIRP-trimmed
    /// when enabled).
    pub fn select(&self, req: &BeamRequirement) -> beamsel_core::Result<classifier::Selection> {
        let mut sel = classifier::select_matrix(&self.engine, &self.model, &self.clusters, &self.representatives, req)?;
        if self.trim_eirp {
            sel.weights = classifier::trim_eirp(&self.engine, &sel.weights, req)?;
        }
        Ok(sel)
    }
}

/// Per-requirement evaluation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub requirement: BeamRequirement,
    pub cluster: usize,
    pub assigned_cluster: usize,
    /// Achieved metrics, or `None` when the pattern could not be measured.
    pub metrics: Option<PatternMetrics>,
    /// EIRP toward the pointing before any drive trim.
    pub eirp_untrimmed: f64,
}

impl EvalRow {
    pub fn bw_az_error(&self) -> Option<f64> {
        self.metrics.map(|m| (m.beamwidth_az - self.requirement.bw_az_deg).abs())
    }
    pub fn bw_el_error(&self) -> Option<f64> {
        self.metrics.map(|m| (m.beamwidth_el - self.requirement.bw_el_deg).abs())
    }
    pub fn eirp_error(&self) -> Option<f64> {
        self.metrics.map(|m| (m.eirp - self.requirement.eirp_dbw).abs())
    }
    pub fn sll_az_error(&self) -> Option<f64> {
        self.metrics.map(|m| (m.sll_az - self.requirement.sll_az_db).abs())
    }
    pub fn sll_el_error(&self) -> Option<f64> {
        self.metrics.map(|m| (m.sll_el - self.requirement.sll_el_db).abs())
    }
    pub fn pointing_error(&self) -> Option<f64> {
        self.metrics.map(|m| {
            (m.peak_el - self.requirement.point_el_deg).abs().max((m.peak_az - self.requirement.point_az_deg).abs())
        })
    }
}

/// Summary statistics of one error column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub max: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { count: 0, mean: f64::NAN, median: f64::NAN, p10: f64::NAN, p90: f64::NAN, max: f64::NAN };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        // Linear interpolation between closest ranks.
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: q(0.5),
            p10: q(0.1),
            p90: q(0.9),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub samples: usize,
    pub unmeasurable: usize,
    /// Fraction of requirements whose selected cluster equals the k-means
    /// assignment.
    pub cluster_agreement: f64,
    pub eirp_trimmed: bool,
    pub bw_az_error_deg: Distribution,
    pub bw_el_error_deg: Distribution,
    pub eirp_error_db: Distribution,
    pub eirp_error_untrimmed_db: Distribution,
    pub sll_az_error_db: Distribution,
    pub sll_el_error_db: Distribution,
    pub pointing_error_deg: Distribution,
}

/// Selects and measures a matrix for each requirement.
pub fn evaluate_requirements(selector: &Selector, reqs: &[BeamRequirement]) -> CliResult<Vec<EvalRow>> {
    reqs.par_iter()
        .map(|req| {
            let raw = classifier::select_matrix(
                &selector.engine,
                &selector.model,
                &selector.clusters,
                &selector.representatives,
                req,
            )?;
            let eirp_untrimmed = selector.engine.eirp(&raw.weights, req.pointing())?;
            let weights = if selector.trim_eirp {
                classifier::trim_eirp(&selector.engine, &raw.weights, req)?
            } else {
                raw.weights
            };
            Ok(EvalRow {
                requirement: *req,
                cluster: raw.cluster,
                assigned_cluster: selector.clusters.assign(req),
                metrics: selector.engine.measure(&weights, Some(req.pointing())).ok(),
                eirp_untrimmed,
            })
        })
        .collect::<beamsel_core::Result<Vec<_>>>()
        .map_err(|e| CliError::stage("eval", e))
}

pub fn summarize(rows: &[EvalRow], trimmed: bool) -> EvalSummary {
    let col = |f: fn(&EvalRow) -> Option<f64>| Distribution::of(&rows.iter().filter_map(f).collect::<Vec<_>>());
    let untrimmed: Vec<f64> = rows.iter().map(|r| (r.eirp_untrimmed - r.requirement.eirp_dbw).abs()).collect();
    let agree = rows.iter().filter(|r| r.cluster == r.assigned_cluster).count();
    EvalSummary {
        samples: rows.len(),
        unmeasurable: rows.iter().filter(|r| r.metrics.is_none()).count(),
        cluster_agreement: agree as f64 / rows.len().max(1) as f64,
        eirp_trimmed: trimmed,
        bw_az_error_deg: col(EvalRow::bw_az_error),
        bw_el_error_deg: col(EvalRow::bw_el_error),
        eirp_error_db: col(EvalRow::eirp_error),
        eirp_error_untrimmed_db: Distribution::of(&untrimmed),
        sll_az_error_db: col(EvalRow::sll_az_error),
        sll_el_error_db: col(EvalRow::sll_el_error),
        pointing_error_deg: col(EvalRow::pointing_error),
    }
}

pub const EVAL_HEADER: [&str; 18] = [
    "bw_el_deg",
    "bw_az_deg",
    "sll_el_db",
    "sll_az_db",
    "eirp_dbw",
    "point_el_deg",
    "point_az_deg",
    "cluster",
    "assigned_cluster",
    "achieved_bw_az_deg",
    "achieved_bw_el_deg",
    "achieved_sll_az_db",
    "achieved_sll_el_db",
    "achieved_eirp_dbw",
    "peak_el_deg",
    "peak_az_deg",
    "eirp_untrimmed_dbw",
    "measurable",
];

fn run_eval(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let selector = Selector::load(cfg)?;
    let reqs = sample_requirements(cfg, cfg.eval_samples, seeds::stage_seed(cfg.seed, seeds::EVAL));
    let rows = evaluate_requirements(&selector, &reqs)?;
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut row = r.requirement.to_features().to_vec();
            row.extend([r.cluster as f64, r.assigned_cluster as f64]);
            let m = r.metrics.unwrap_or(PatternMetrics {
                beamwidth_az: f64::NAN,
                beamwidth_el: f64::NAN,
                sll_az: f64::NAN,
                sll_el: f64::NAN,
                eirp: f64::NAN,
                peak_el: f64::NAN,
                peak_az: f64::NAN,
            });
            row.extend([m.beamwidth_az, m.beamwidth_el, m.sll_az, m.sll_el, m.eirp, m.peak_el, m.peak_az]);
            row.extend([r.eirp_untrimmed, r.metrics.is_some() as u8 as f64]);
            row
        })
        .collect();
    let rows_path = cfg.out_dir.join(paths::EVAL_ROWS);
    formats::write_table(&rows_path, &EVAL_HEADER, &table)?;
    let summary_path = cfg.out_dir.join(paths::EVAL_SUMMARY);
    formats::write_json(&summary_path, &summarize(&rows, cfg.trim_eirp))?;
    Ok(vec![rows_path, summary_path])
}

/// Runs one stage after checking its inputs, and records it in the manifest.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> CliResult<StageRecord> {
    cfg.validate()?;
    verify_prerequisites(&cfg.out_dir, stage)?;
    let start = Instant::now();
    let outputs = match stage {
        Stage::Dataset => vec![generate_dataset(cfg)?],
        Stage::Cluster => run_cluster(cfg)?,
        Stage::Representatives => run_representatives(cfg)?,
        Stage::Train => run_train(cfg)?,
        Stage::Eval => run_eval(cfg)?,
    };
    commit(cfg, stage, start.elapsed().as_secs_f64(), &outputs)
}

/// All stages in order. Stops at the first failure, leaving the manifest
/// with the stages that did complete.
pub fn run_full_pipeline(cfg: &PipelineConfig) -> CliResult<Manifest> {
    for stage in Stage::ALL {
        run_stage(cfg, stage)?;
    }
    Manifest::load(&cfg.out_dir)?.ok_or_else(|| CliError::Io("manifest vanished after the pipeline ran".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prerequisites_are_the_earlier_stages() {
        assert!(Stage::Dataset.prerequisites().is_empty());
        assert_eq!(Stage::Eval.prerequisites(), &Stage::ALL[..4]);
        assert_eq!(Stage::Representatives.prerequisites(), &[Stage::Dataset, Stage::Cluster]);
    }

    #[test]
    fn distribution_quantiles() {
        let d = Distribution::of(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(d.median, 2.5);
        assert_eq!(d.max, 4.0);
        assert_eq!(d.mean, 2.5);
        assert!((d.p90 - 3.7).abs() < 1e-12);
        assert_eq!(Distribution::of(&[]).count, 0);
    }

    #[test]
    fn samples_stay_in_range() {
        let cfg = PipelineConfig::default();
        for r in sample_requirements(&cfg, 500, 3) {
            assert!((0.45..=1.5).contains(&r.bw_az_deg) && (0.45..=1.5).contains(&r.bw_el_deg));
            assert!((-30.0..=-20.0).contains(&r.sll_az_db) && (-30.0..=-20.0).contains(&r.sll_el_db));
            assert!((50.0..=70.0).contains(&r.eirp_dbw));
            assert!(r.point_el_deg.abs() <= 8.7 && r.point_az_deg.abs() <= 8.7);
        }
    }
}
