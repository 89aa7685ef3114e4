//! Pipeline configuration: one flat JSON document, every field optional.
//!
//! The requirement sampling ranges for SLL, EIRP and pointing are project
//! defaults rather than values tied to any particular mission; the
//! beamwidth range covers the 0.45 to 1.5 degree span the system is designed
//! around.

use std::path::{Path, PathBuf};

use beamsel_core::classifier::{Activation, TrainConfig};
use beamsel_core::clustering::KMeansConfig;
use beamsel_core::optimizer::OptimizerConfig;
use beamsel_core::synthesis::TaperBounds;
use beamsel_core::{ArrayGeometry, CostWeights, EirpMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    // Array geometry.
    pub carrier_frequency_hz: f64,
    pub subarray_rows: usize,
    pub subarray_cols: usize,
    pub element_rows: usize,
    pub element_cols: usize,
    /// Element pitch in carrier wavelengths.
    pub element_pitch_wavelengths: f64,
    pub efficiency: f64,
    /// Exponent `q` of the `cos^q(theta)` element pattern.
    pub element_exponent: f64,

    // Requirement sampling, as inclusive [low, high] ranges.
    pub bw_range_deg: [f64; 2],
    pub sll_range_db: [f64; 2],
    pub eirp_range_dbw: [f64; 2],
    /// Range for both pointing angles (elevation and azimuth).
    pub pointing_range_deg: [f64; 2],
    pub samples: usize,

    // Clustering.
    pub k: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,

    // Cost and oracle search.
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub eirp_mode: EirpMode,
    pub budget: usize,
    pub taper_min_db: f64,
    pub taper_max_db: f64,

    // Classifier.
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,

    // Evaluation and benchmarking.
    pub eval_samples: usize,
    /// Rescale the selected matrix's drive power to hit the requested EIRP.
    pub trim_eirp: bool,
    pub bench_beams: usize,

    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let kmeans = KMeansConfig::default();
        let taper = TaperBounds::default();
        Self {
            carrier_frequency_hz: 19.0e9,
            subarray_rows: 36,
            subarray_cols: 36,
            element_rows: 4,
            element_cols: 4,
            element_pitch_wavelengths: 0.875,
            efficiency: 0.9,
            element_exponent: 1.0,
            bw_range_deg: [0.45, 1.5],
            sll_range_db: [-30.0, -20.0],
            eirp_range_dbw: [50.0, 70.0],
            pointing_range_deg: [-8.7, 8.7],
            samples: 5000,
            k: kmeans.k,
            kmeans_restarts: kmeans.restarts,
            kmeans_max_iters: kmeans.max_iters,
            kmeans_tol: kmeans.tol,
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
            eirp_mode: EirpMode::Absolute,
            budget: OptimizerConfig::default().budget,
            taper_min_db: taper.min_db,
            taper_max_db: taper.max_db,
            hidden_layers: vec![64, 64],
            activation: Activation::Relu,
            learning_rate: train.learning_rate,
            beta1: train.beta1,
            beta2: train.beta2,
            adam_epsilon: train.epsilon,
            batch_size: train.batch_size,
            epochs: train.epochs,
            patience: train.patience,
            val_fraction: 0.2,
            eval_samples: 200,
            trim_eirp: true,
            bench_beams: 10,
            seed: 1,
            out_dir: PathBuf::from("artifacts"),
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> CliResult<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(CliError::Config(format!("{name} must be a finite [low, high] range, got {r:?}")));
    }
    Ok(())
}

impl PipelineConfig {
    /// Reads a config file. Missing fields take their defaults.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        check_range("bw_range_deg", self.bw_range_deg)?;
        check_range("sll_range_db", self.sll_range_db)?;
        check_range("eirp_range_dbw", self.eirp_range_dbw)?;
        check_range("pointing_range_deg", self.pointing_range_deg)?;
        if !(self.bw_range_deg[0] > 0.0) {
            return Err(CliError::Config("beamwidths must be positive".into()));
        }
        if !(self.sll_range_db[1] < 0.0) {
            return Err(CliError::Config("SLL targets must be negative".into()));
        }
        if self.eirp_range_dbw[0] <= 0.0 && self.eirp_range_dbw[1] >= 0.0 {
            return Err(CliError::Config("EIRP range must not contain 0 dBW".into()));
        }
        if !(self.pointing_range_deg[0] > -90.0 && self.pointing_range_deg[1] < 90.0) {
            return Err(CliError::Config("pointing range must stay inside (-90, 90) degrees".into()));
        }
        if self.k == 0 {
            return Err(CliError::Config("k must be at least 1".into()));
        }
        if self.samples < 10 * self.k {
            return Err(CliError::Config(format!(
                "samples ({}) must be at least 10 * k ({})",
                self.samples,
                10 * self.k
            )));
        }
        if self.hidden_layers.contains(&0) {
            return Err(CliError::Config("hidden layer sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) || self.val_fraction == 0.0 {
            return Err(CliError::Config("val_fraction must lie in (0, 1)".into()));
        }
        self.geometry()?;
        self.cost_weights().validate()?;
        Ok(())
    }

    pub fn geometry(&self) -> CliResult<ArrayGeometry> {
        let wavelength = beamsel_core::geometry::SPEED_OF_LIGHT / self.carrier_frequency_hz;
        ArrayGeometry::new(
            self.carrier_frequency_hz,
            (self.subarray_rows, self.subarray_cols),
            (self.element_rows, self.element_cols),
            self.element_pitch_wavelengths * wavelength,
            self.efficiency,
            self.element_exponent,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn cost_weights(&self) -> CostWeights {
        CostWeights { k1: self.k1, k2: self.k2, k3: self.k3 }
    }

    pub fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.k,
            seed: seeds::stage_seed(self.seed, seeds::CLUSTER),
            max_iters: self.kmeans_max_iters,
            tol: self.kmeans_tol,
            restarts: self.kmeans_restarts,
        }
    }

    /// Oracle settings with an explicit seed.
    pub fn optimizer_config(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            budget: self.budget,
            seed,
            eirp_mode: self.eirp_mode,
            cost_weights: self.cost_weights(),
            taper_bounds: TaperBounds { min_db: self.taper_min_db, max_db: self.taper_max_db },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
            batch_size: self.batch_size,
            epochs: self.epochs,
            patience: self.patience,
            seed: seeds::stage_seed(self.seed, seeds::TRAIN),
        }
    }

    /// Layer sizes from input to output.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![beamsel_core::cost::FEATURE_COUNT];
        sizes.extend(&self.hidden_layers);
        sizes.push(self.k);
        sizes
    }
}
