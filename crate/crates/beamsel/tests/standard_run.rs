//! Properties of the classifier trained by the standard pipeline.

use std::sync::OnceLock;

use beamsel::config::PipelineConfig;
use beamsel::formats::{self, ClusterModelFile};
use beamsel::pipeline::{load_training_data, paths, run_full_pipeline, Selector};
use beamsel::seeds;
use beamsel_core::classifier::{evaluate, MlpModel};

fn standard() -> &'static (tempfile::TempDir, PipelineConfig) {
    static CELL: OnceLock<(tempfile::TempDir, PipelineConfig)> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig { out_dir: dir.path().to_path_buf(), ..PipelineConfig::default() };
        run_full_pipeline(&cfg).unwrap();
        (dir, cfg)
    })
}

#[test]
fn centroids_are_selected_with_high_confidence() {
    let (_, cfg) = standard();
    let selector = Selector::load(cfg).unwrap();
    for i in 0..cfg.k {
        let req = selector.clusters.centroid_requirement(i);
        let p = selector.model.predict(&req).unwrap();
        let sel = selector.select(&req).unwrap();
        assert_eq!(sel.cluster, i);
        assert!(p[i] > 0.9, "cluster {i}: p = {}", p[i]);
    }
}

#[test]
fn smoothed_training_loss_never_rises() {
    let (_, cfg) = standard();
    let curves = formats::read_curves(&cfg.out_dir.join(paths::REPORT_DIR).join("curves.csv")).unwrap();
    let losses: Vec<f64> = curves.iter().map(|c| c.train_loss).collect();
    let smoothed: Vec<f64> = losses.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    assert!(smoothed.len() > 10);
    for (i, w) in smoothed.windows(2).enumerate() {
        assert!(w[1] <= w[0], "window {i}: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn first_epoch_lowers_the_training_loss() {
    let (_, cfg) = standard();
    let (train_set, _, _) = load_training_data(cfg).unwrap();
    let file = ClusterModelFile::read(&cfg.out_dir.join(paths::CLUSTER_MODEL)).unwrap();
    let init = MlpModel::init(&cfg.layer_sizes(), cfg.activation, file.normalizer, seeds::stage_seed(cfg.seed, seeds::TRAIN_INIT))
        .unwrap();
    let before = evaluate(&init, &train_set).unwrap().0;
    let curves = formats::read_curves(&cfg.out_dir.join(paths::REPORT_DIR).join("curves.csv")).unwrap();
    assert!(curves[0].train_loss < before, "{before} -> {}", curves[0].train_loss);
}

#[test]
fn validation_split_is_stratified() {
    let (_, cfg) = standard();
    let split: beamsel::pipeline::Split = formats::read_json(&cfg.out_dir.join(paths::SPLIT)).unwrap();
    let data = formats::read_dataset(&cfg.out_dir.join(paths::LABELED)).unwrap();
    let labels = data.labels.unwrap();
    assert_eq!(split.train.len() + split.val.len(), labels.len());
    for c in 0..cfg.k {
        let total = labels.iter().filter(|&&l| l == c).count() as f64;
        let in_val = split.val.iter().filter(|&&i| labels[i] == c).count() as f64;
        assert!((in_val - cfg.val_fraction * total).abs() <= 0.5 + 1e-9, "class {c}: {in_val} of {total}");
    }
}
