//! Per-stage seeds derived from the master seed.
//!
//! The seed for stage `name` is the first eight bytes (little endian) of
//! `SHA-256(master_seed as 8 little-endian bytes || name as UTF-8)`. Every
//! random draw in the pipeline comes from one of these.

use sha2::{Digest, Sha256};

pub const DATASET: &str = "dataset";
pub const CLUSTER: &str = "cluster";
pub const REPRESENTATIVES: &str = "representatives";
pub const SPLIT: &str = "split";
pub const TRAIN_INIT: &str = "train-init";
pub const TRAIN: &str = "train";
pub const EVAL: &str = "eval";
pub const BENCH: &str = "bench";

pub fn stage_seed(master: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Seed for item `index` within a stage (one optimizer run per cluster, say).
pub fn item_seed(master: u64, stage: &str, index: usize) -> u64 {
    stage_seed(master, &format!("{stage}/{index}"))
}
