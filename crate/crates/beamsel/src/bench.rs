//! Oracle search versus trained selection, timed on the same requirements.

use std::time::Instant;

use beamsel_core::optimizer::optimize_matrix;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::{sample_requirements, verify_prerequisites, Selector, Stage};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub n_beams: usize,
    pub per_beam_oracle_s: Vec<f64>,
    pub total_oracle_s: f64,
    pub model_load_s: f64,
    pub per_beam_inference_s: Vec<f64>,
    pub total_inference_s: f64,
    /// `total_oracle_s / total_inference_s`, or 0 when nothing was timed.
    pub speedup: f64,
}

impl BenchmarkResult {
    pub fn from_timings(per_beam_oracle_s: Vec<f64>, model_load_s: f64, per_beam_inference_s: Vec<f64>) -> Self {
        let total_oracle_s: f64 = per_beam_oracle_s.iter().sum();
        let total_inference_s: f64 = per_beam_inference_s.iter().sum();
        let speedup = if total_inference_s > 0.0 { total_oracle_s / total_inference_s } else { 0.0 };
        Self {
            n_beams: per_beam_oracle_s.len(),
            per_beam_oracle_s,
            total_oracle_s,
            model_load_s,
            per_beam_inference_s,
            total_inference_s,
            speedup,
        }
    }
}

/// Times the oracle and the loaded selector on `n_beams` random requirements
/// drawn from the configured ranges. Inference covers selection, re-steering
/// and (when enabled) the EIRP trim; model loading is timed separately.
/// Oracle failures still count their elapsed time.
pub fn benchmark_timing(cfg: &PipelineConfig, n_beams: usize) -> CliResult<BenchmarkResult> {
    cfg.validate()?;
    verify_prerequisites(&cfg.out_dir, Stage::Eval)?;
    let start = Instant::now();
    let selector = Selector::load(cfg)?;
    let model_load_s = start.elapsed().as_secs_f64();
    let reqs = sample_requirements(cfg, n_beams, seeds::stage_seed(cfg.seed, seeds::BENCH));

    let mut oracle = Vec::with_capacity(n_beams);
    for (i, req) in reqs.iter().enumerate() {
        let opt = cfg.optimizer_config(seeds::item_seed(cfg.seed, seeds::BENCH, i));
        let t = Instant::now();
        let _ = std::hint::black_box(optimize_matrix(&selector.engine, req, &opt));
        oracle.push(t.elapsed().as_secs_f64());
    }
    let mut inference = Vec::with_capacity(n_beams);
    for req in &reqs {
        let t = Instant::now();
        let sel = selector.select(req).map_err(|e| CliError::stage("bench", e))?;
        inference.push(t.elapsed().as_secs_f64());
        std::hint::black_box(sel);
    }
    Ok(BenchmarkResult::from_timings(oracle, model_load_s, inference))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_beams_give_a_zeroed_result() {
        let r = BenchmarkResult::from_timings(vec![], 0.25, vec![]);
        assert_eq!(r.n_beams, 0);
        assert_eq!(r.total_oracle_s, 0.0);
        assert_eq!(r.total_inference_s, 0.0);
        assert_eq!(r.speedup, 0.0);
    }

    #[test]
    fn speedup_is_the_ratio_of_totals() {
        let r = BenchmarkResult::from_timings(vec![1.0, 2.0], 0.1, vec![0.01, 0.02]);
        assert!((r.speedup - 100.0).abs() < 1e-9);
        assert_eq!(r.n_beams, 2);
    }
}
