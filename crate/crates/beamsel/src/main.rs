use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use beamsel::config::PipelineConfig;
use beamsel::error::{CliError, CliResult};
use beamsel::pipeline::{self, paths, Selector, Stage};
use beamsel::{bench, export, formats, seeds};
use beamsel_core::engine::CutConfig;
use beamsel_core::optimizer::{optimize_matrix, OptimizeError};
use beamsel_core::synthesis::{synthesize_with_bounds, SynthesisParams, TaperBounds};
use beamsel_core::{BeamRequirement, Direction, EirpMode};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "beamsel", version, about = "Beamforming matrix selection for a multibeam direct-radiating array")]
struct Cli {
    /// Flat JSON configuration file; absent fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory, overriding the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EirpModeArg {
    Absolute,
    Signed,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the requirement dataset.
    Gen,
    /// Fit k-means and label the dataset.
    Cluster,
    /// Run the oracle search for one requirement file.
    Oracle {
        /// Requirement JSON.
        requirement: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, value_enum)]
        eirp_mode: Option<EirpModeArg>,
        /// Output prefix; writes `<prefix>_weights.json` and `<prefix>_cost.json`.
        #[arg(long, default_value = "oracle")]
        output: PathBuf,
    },
    /// Build one representative matrix per cluster.
    Reps,
    /// Train the classifier.
    Train,
    /// Evaluate selection on held-out requirements.
    Eval,
    /// Select a matrix for one requirement file with the trained artifacts.
    Infer {
        requirement: PathBuf,
        /// Output prefix; writes `<prefix>_weights.json` and `<prefix>_selection.json`.
        #[arg(long, default_value = "infer")]
        output: PathBuf,
    },
    /// Write azimuth and elevation cuts and metrics for a weight file.
    ExportPattern {
        weights: PathBuf,
        /// Output prefix for `<prefix>_az.csv`, `<prefix>_el.csv`, `<prefix>_metrics.json`.
        #[arg(long, default_value = "pattern")]
        output: PathBuf,
        #[arg(long, default_value_t = beamsel_core::pattern::DEFAULT_HALF_SPAN_DEG)]
        half_span_deg: f64,
        #[arg(long, default_value_t = beamsel_core::pattern::DEFAULT_STEP_DEG)]
        step_deg: f64,
        /// Elevation and azimuth (degrees) to start the peak search from.
        #[arg(long, num_args = 2, value_names = ["EL", "AZ"], allow_negative_numbers = true)]
        hint: Option<Vec<f64>>,
    },
    /// Time the oracle against trained selection.
    Bench {
        /// Number of beams; defaults to the config value.
        #[arg(long)]
        beams: Option<usize>,
    },
    /// Run every stage in order.
    Pipeline,
    /// Synthesize a weight matrix from explicit parameters.
    Synth {
        /// SynthesisParams JSON.
        params: PathBuf,
        #[arg(long, default_value = "synth_weights.json")]
        output: PathBuf,
    },
}

/// Resolves relative output prefixes against the artifact directory.
fn under(cfg: &PipelineConfig, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        cfg.out_dir.join(p)
    }
}

fn suffixed(prefix: &std::path::Path, suffix: &str) -> PathBuf {
    let name = prefix.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    prefix.with_file_name(format!("{name}{suffix}"))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("value serializes"));
}

fn stage(cfg: &PipelineConfig, s: Stage) -> CliResult<()> {
    let record = pipeline::run_stage(cfg, s)?;
    eprintln!("{}: done in {:.2} s, {} files", s.name(), record.seconds, record.outputs.len());
    Ok(())
}

fn read_requirement(path: &std::path::Path) -> CliResult<BeamRequirement> {
    let req: BeamRequirement = formats::read_json(path)?;
    req.validate().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(req)
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = cli.out_dir {
        cfg.out_dir = dir;
    }
    cfg.validate()?;
    match cli.command {
        Command::Gen => stage(&cfg, Stage::Dataset),
        Command::Cluster => stage(&cfg, Stage::Cluster),
        Command::Reps => stage(&cfg, Stage::Representatives),
        Command::Train => stage(&cfg, Stage::Train),
        Command::Eval => {
            stage(&cfg, Stage::Eval)?;
            let summary: pipeline::EvalSummary = formats::read_json(&cfg.out_dir.join(paths::EVAL_SUMMARY))?;
            print_json(&summary);
            Ok(())
        }
        Command::Pipeline => {
            for s in Stage::ALL {
                stage(&cfg, s)?;
            }
            Ok(())
        }
        Command::Oracle { requirement, budget, eirp_mode, output } => {
            let req = read_requirement(&requirement)?;
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if let Some(m) = eirp_mode {
                cfg.eirp_mode = match m {
                    EirpModeArg::Absolute => EirpMode::Absolute,
                    EirpModeArg::Signed => EirpMode::Signed,
                };
            }
            let engine = pipeline::engine_for(&cfg)?;
            let opt = cfg.optimizer_config(seeds::stage_seed(cfg.seed, "oracle"));
            let outcome = match optimize_matrix(&engine, &req, &opt) {
                Ok(o) => o,
                Err(OptimizeError::Invalid(e)) => return Err(CliError::Config(e.to_string())),
                Err(e) => return Err(CliError::stage("oracle", e)),
            };
            let prefix = under(&cfg, output);
            formats::write_weights(&suffixed(&prefix, "_weights.json"), &outcome.weights)?;
            formats::write_json(&suffixed(&prefix, "_cost.json"), &outcome.cost)?;
            print_json(&outcome.cost);
            Ok(())
        }
        Command::Infer { requirement, output } => {
            let req = read_requirement(&requirement)?;
            let selector = Selector::load(&cfg)?;
            let t = Instant::now();
            let sel = selector.select(&req).map_err(CliError::from)?;
            let seconds = t.elapsed().as_secs_f64();
            #[derive(Serialize)]
            struct Report<'a> {
                cluster: usize,
                probabilities: &'a [f64],
                seconds: f64,
            }
            let prefix = under(&cfg, output);
            let report = Report { cluster: sel.cluster, probabilities: &sel.probabilities, seconds };
            formats::write_weights(&suffixed(&prefix, "_weights.json"), &sel.weights)?;
            formats::write_json(&suffixed(&prefix, "_selection.json"), &report)?;
            print_json(&report);
            Ok(())
        }
        Command::ExportPattern { weights, output, half_span_deg, step_deg, hint } => {
            let hint = hint.map(|h| Direction::from_el_az_deg(h[0], h[1]));
            let cut = CutConfig { half_span_deg, step_deg };
            let out = export::export_pattern(&cfg.geometry()?, &weights, cut, hint, &under(&cfg, output))?;
            print_json(&out.metrics);
            Ok(())
        }
        Command::Bench { beams } => {
            let result = bench::benchmark_timing(&cfg, beams.unwrap_or(cfg.bench_beams))?;
            formats::write_json(&cfg.out_dir.join("bench.json"), &result)?;
            print_json(&result);
            Ok(())
        }
        Command::Synth { params, output } => {
            let p: SynthesisParams = formats::read_json(&params)?;
            let bounds = TaperBounds { min_db: cfg.taper_min_db, max_db: cfg.taper_max_db };
            let w = synthesize_with_bounds(&cfg.geometry()?, &p, bounds).map_err(|e| CliError::Config(e.to_string()))?;
            formats::write_weights(&under(&cfg, output), &w)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("beamsel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
