//! Round trips and error reporting of the on-disk formats.

use beamsel::error::CliError;
use beamsel::formats::{self, ClusterModelFile, Dataset, WeightMatrixFile};
use beamsel_core::classifier::{Activation, EpochStats, MlpModel, RocPoint, TrainingReport};
use beamsel_core::clustering::{ClusterModel, FeatureNormalizer};
use beamsel_core::synthesis::{synthesize, SynthesisParams};
use beamsel_core::{ArrayGeometry, BeamRequirement, Direction, WeightMatrix};

fn sample_weights() -> WeightMatrix {
    let g = ArrayGeometry::default();
    let steer = Direction::from_el_az_deg(1.5, -2.5);
    let params = SynthesisParams {
        steer: (steer.theta(), steer.phi()),
        taper_sll_az: -25.0,
        taper_sll_el: -22.0,
        active_rows: 20,
        active_cols: 28,
        power_scale: 1.7,
        nulls: vec![],
    };
    synthesize(&g, &params).unwrap()
}

#[test]
fn weight_matrix_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    let w = sample_weights();
    formats::write_weights(&path, &w).unwrap();
    assert_eq!(formats::read_weights(&path).unwrap(), w);
    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for key in ["rows", "cols", "amp", "phase_rad", "mask", "per_element_power_w"] {
        assert!(raw.get(key).is_some(), "missing {key}");
    }
    assert_eq!(raw["amp"].as_array().unwrap().len(), 36 * 36);
}

#[test]
fn malformed_weight_file_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"rows\": 2,\n  \"cols\": oops\n}\n").unwrap();
    let err = formats::read_weights(&path).unwrap_err();
    assert!(matches!(err, CliError::Io(_)));
    assert!(err.to_string().contains("line 3"), "{err}");

    let mut file = WeightMatrixFile::from(&WeightMatrix::uniform(2, 2, 1.0).unwrap());
    file.amp.pop();
    formats::write_json(&path, &file).unwrap();
    assert!(formats::read_weights(&path).is_err());

    file = WeightMatrixFile::from(&WeightMatrix::uniform(2, 2, 1.0).unwrap());
    file.mask[1] = 7;
    formats::write_json(&path, &file).unwrap();
    assert!(formats::read_weights(&path).unwrap_err().to_string().contains("mask"));
}

#[test]
fn cut_csv_round_trips_and_reports_bad_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.csv");
    let samples = vec![(-0.02, -7.123456789012345), (-0.01, -1.0e-3), (0.0, 0.0), (0.01, -0.5), (0.02, -400.0)];
    formats::write_cut(&path, &samples).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("angle_deg,mag_db\n"));
    assert_eq!(formats::read_cut(&path).unwrap(), samples);

    std::fs::write(&path, "angle_deg,mag_db\n0.0,0.0\n0.01,abc\n").unwrap();
    let msg = formats::read_cut(&path).unwrap_err().to_string();
    assert!(msg.contains(":3:") && msg.contains("mag_db"), "{msg}");

    std::fs::write(&path, "angle,db\n0.0,0.0\n").unwrap();
    assert!(formats::read_cut(&path).is_err());
}

#[test]
fn dataset_round_trips_with_and_without_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let features = vec![[0.5, 1.25, -21.0, -29.5, 55.0, 1.0 / 3.0, -8.7], [1.5, 0.45, -20.0, -30.0, 70.0, 0.0, 8.7]];
    let unlabeled = Dataset { features: features.clone(), labels: None };
    formats::write_dataset(&path, &unlabeled).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("bw_el_deg,bw_az_deg,sll_el_db,sll_az_db,eirp_dbw,point_el_deg,point_az_deg\n"));
    assert_eq!(formats::read_dataset(&path).unwrap(), unlabeled);

    let labeled = Dataset { features, labels: Some(vec![3, 0]) };
    formats::write_dataset(&path, &labeled).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().lines().next().unwrap().ends_with(",label"));
    assert_eq!(formats::read_dataset(&path).unwrap(), labeled);
}

#[test]
fn cluster_model_resolves_representatives_relative_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    let model = ClusterModel {
        k: 2,
        centroids: vec![[0.1; 7], [-0.2; 7]],
        normalizer: FeatureNormalizer { means: [1.0; 7], std_devs: [0.5; 7], degenerate: [false; 7] },
        inertia: 12.5,
    };
    let file = ClusterModelFile::new(&model, vec!["reps/a.json".into(), "reps/b.json".into()]);
    let path = dir.path().join("nested/model.json");
    formats::write_json(&path, &file).unwrap();
    let w = sample_weights();
    formats::write_weights(&dir.path().join("nested/reps/a.json"), &w).unwrap();
    formats::write_weights(&dir.path().join("nested/reps/b.json"), &w).unwrap();
    let back = ClusterModelFile::read(&path).unwrap();
    assert_eq!(back.model(), model);
    assert_eq!(back.load_representatives(&path).unwrap(), vec![w.clone(), w]);

    let mut broken = file.clone();
    broken.representatives.pop();
    formats::write_json(&path, &broken).unwrap();
    assert!(ClusterModelFile::read(&path).is_err());
}

#[test]
fn mlp_model_and_requirement_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let norm = FeatureNormalizer { means: [0.3; 7], std_devs: [1.7; 7], degenerate: [false; 7] };
    let model = MlpModel::init(&[7, 16, 9, 5], Activation::Tanh, norm, 4).unwrap();
    let path = dir.path().join("mlp.json");
    formats::write_json(&path, &model).unwrap();
    assert_eq!(formats::read_json::<MlpModel>(&path).unwrap(), model);

    let req = BeamRequirement {
        bw_az_deg: 0.7,
        bw_el_deg: 1.1,
        sll_az_db: -23.0,
        sll_el_db: -27.0,
        eirp_dbw: 61.0,
        point_el_deg: 0.1,
        point_az_deg: -5.0,
    };
    let rpath = dir.path().join("req.json");
    formats::write_json(&rpath, &req).unwrap();
    assert_eq!(formats::read_json::<BeamRequirement>(&rpath).unwrap(), req);
}

#[test]
fn report_bundle_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let report = TrainingReport {
        curves: vec![
            EpochStats { epoch: 1, train_loss: 1.5, val_loss: 1.6, train_acc: 0.5, val_acc: 0.45 },
            EpochStats { epoch: 2, train_loss: 0.9, val_loss: 1.0, train_acc: 0.7, val_acc: 0.65 },
        ],
        best_epoch: 2,
        stopped_early: false,
        confusion: vec![vec![3, 1], vec![0, 4]],
        roc: vec![
            vec![RocPoint { threshold: 1.0, tpr: 0.0, fpr: 0.0 }, RocPoint { threshold: 0.2, tpr: 1.0, fpr: 0.5 }],
            vec![RocPoint { threshold: 0.9, tpr: 0.5, fpr: 0.0 }],
        ],
    };
    let paths = formats::write_report(dir.path(), &report).unwrap();
    let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["curves.csv", "confusion.csv", "roc_class_0.csv", "roc_class_1.csv"]);
    assert_eq!(formats::read_curves(&dir.path().join("curves.csv")).unwrap(), report.curves);
    assert_eq!(formats::read_confusion(&dir.path().join("confusion.csv")).unwrap(), report.confusion);
    let roc = std::fs::read_to_string(dir.path().join("roc_class_0.csv")).unwrap();
    assert!(roc.starts_with("threshold,tpr,fpr\n"));
}
