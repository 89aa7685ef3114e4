#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use beamsel::config::PipelineConfig;
use beamsel::pipeline::run_full_pipeline;

/// 200 samples, K = 4, oracle budget 100.
pub fn tiny_config(out_dir: &Path) -> PipelineConfig {
    PipelineConfig {
        samples: 200,
        k: 4,
        budget: 100,
        eval_samples: 40,
        bench_beams: 4,
        seed: 17,
        out_dir: out_dir.to_path_buf(),
        ..PipelineConfig::default()
    }
}

/// A tiny pipeline run shared by every test in one binary.
pub fn tiny_artifacts() -> &'static (tempfile::TempDir, PipelineConfig) {
    static CELL: OnceLock<(tempfile::TempDir, PipelineConfig)> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        run_full_pipeline(&cfg).unwrap();
        (dir, cfg)
    })
}

/// Copies a directory tree.
pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target: PathBuf = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}
